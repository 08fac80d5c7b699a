// SPDX-License-Identifier: Apache-2.0
#include "momtx/marketdata/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "momtx/errors.hpp"

namespace momtx::marketdata {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

template <class T>
bool parse_int(std::string_view s, T& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

Date parse_date(std::string_view text, std::size_t line) {
  text = trim(text);
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  if (text.size() != 10 || text[4] != '-' || text[7] != '-' ||
      !parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), m) ||
      !parse_int(text.substr(8, 2), d)) {
    throw ParseError(fmt::format("invalid date '{}', expected YYYY-MM-DD", text), line);
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                        std::chrono::day{d}};
  if (!ymd.ok()) throw ParseError(fmt::format("invalid calendar date '{}'", text), line);
  return Date{ymd};
}

std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    const std::string_view field =
        line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    out.emplace_back(trim(field));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

double parse_double(std::string_view text, std::size_t line) {
  text = trim(text);
  const std::string buf(text);
  char* end = nullptr;
  const double v = std::strtod(buf.c_str(), &end);
  if (buf.empty() || end != buf.c_str() + buf.size()) {
    throw ParseError(fmt::format("invalid number '{}'", text), line);
  }
  return v;
}

CsvReader::CsvReader(const std::filesystem::path& path,
                     const std::vector<std::string>& expected_header)
    : in_(path), path_(path), columns_(expected_header.size()) {
  if (!in_) throw DataError(fmt::format("cannot open {}", path.string()));
  std::vector<std::string> header;
  if (!next(header)) throw ParseError(fmt::format("{}: missing header", path.string()), 1);
  if (header != expected_header) {
    throw ParseError(fmt::format("{}: expected header '{}', got '{}'", path.string(),
                                 fmt::join(expected_header, ","), fmt::join(header, ",")),
                     line_);
  }
}

bool CsvReader::next(std::vector<std::string>& fields) {
  std::string raw;
  while (std::getline(in_, raw)) {
    ++line_;
    if (trim(raw).empty()) continue;
    fields = split_csv_line(raw);
    if (columns_ != 0 && fields.size() != columns_) {
      throw ParseError(fmt::format("{}: expected {} fields, got {}", path_.string(), columns_,
                                   fields.size()),
                       line_);
    }
    return true;
  }
  return false;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot write {}", tmp.string()));
    out << text;
    if (!out) throw DataError(fmt::format("write failed for {}", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace momtx::marketdata
