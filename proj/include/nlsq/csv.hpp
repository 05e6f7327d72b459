#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

namespace nlsq {

/// Minimal CSV writer: header row, then numeric rows at 12 significant digits.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> columns);

  void row(std::initializer_list<double> values);
  void row(const std::vector<double>& values);

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::size_t width_;
  std::ofstream out_;
};

/// Formats a double with 12 significant digits ("%.12g").
std::string format_number(double value);

}  // namespace nlsq
