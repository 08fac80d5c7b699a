// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace momtx::marketdata {

using Date = std::chrono::sys_days;

/// Parses YYYY-MM-DD. Throws ParseError tagged with `line` otherwise.
Date parse_date(std::string_view text, std::size_t line = 0);
std::string format_date(Date d);

/// Splits on commas and trims surrounding whitespace. No quoting support.
std::vector<std::string> split_csv_line(std::string_view line);

double parse_double(std::string_view text, std::size_t line = 0);

/// Line-oriented reader that tracks 1-based line numbers and checks the
/// header row against an expected column list.
class CsvReader {
 public:
  CsvReader(const std::filesystem::path& path,
            const std::vector<std::string>& expected_header);

  /// Next non-empty row; false at end of file.
  bool next(std::vector<std::string>& fields);
  std::size_t line() const noexcept { return line_; }

 private:
  std::ifstream in_;
  std::filesystem::path path_;
  std::size_t line_ = 0;
  std::size_t columns_ = 0;
};

/// Writes `text` to `path` through a temporary sibling and a rename, so
/// readers never observe a half-written file.
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace momtx::marketdata
