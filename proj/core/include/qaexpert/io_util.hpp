#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace qaexpert::io {

std::string read_text_file(const std::filesystem::path& path);
// Writes through a temporary sibling and renames, so readers never observe a
// partially written artifact.
void write_text_file(const std::filesystem::path& path, std::string_view content);
void append_line(const std::filesystem::path& path, std::string_view line);

std::vector<std::string> split(std::string_view text, char delimiter);
std::vector<std::string> split_lines(std::string_view text);
std::string_view trim(std::string_view text);

// Shortest representation that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text);
std::int64_t parse_int(std::string_view text);

// Delimited table with a header row. Cells must not contain the delimiter.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;  // throws kNotFound
};
std::string format_table(const Table& table, char delimiter = ',');
Table parse_table(std::string_view text, char delimiter = ',');
void write_table(const std::filesystem::path& path, const Table& table, char delimiter = ',');
Table read_table(const std::filesystem::path& path, char delimiter = ',');

std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t value);

// UTC calendar helpers (proleptic Gregorian).
struct YearMonth {
  int year = 1970;
  int month = 1;  // 1..12

  auto operator<=>(const YearMonth&) const = default;
  YearMonth next() const;
};
YearMonth utc_year_month(std::int64_t epoch_seconds);
YearMonth parse_year_month(std::string_view text);  // "YYYY-MM"
std::string to_string(const YearMonth& ym);
std::int64_t epoch_seconds(int year, int month, int day);

}  // namespace qaexpert::io
