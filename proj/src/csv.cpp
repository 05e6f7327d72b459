#include "nlsq/csv.hpp"

#include <cstdio>

#include "nlsq/errors.hpp"

namespace nlsq {

std::string format_number(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", value);
  return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::vector<std::string> columns)
    : path_(path), width_(columns.size()), out_(path) {
  if (!out_) throw ValidationError("cannot open '" + path.string() + "' for writing");
  for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
  out_ << '\n';
}

void CsvWriter::row(const std::vector<double>& values) {
  if (values.size() != width_) throw ValidationError("CSV row width mismatch in " + path_.string());
  for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_number(values[i]);
  out_ << '\n';
}

void CsvWriter::row(std::initializer_list<double> values) { row(std::vector<double>(values)); }

}  // namespace nlsq
