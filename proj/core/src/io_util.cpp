#include "qaexpert/io_util.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include "qaexpert/error.hpp"

namespace qaexpert::io {

namespace fs = std::filesystem;

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) fail(ErrorCode::kIo, "read error on " + path.string());
  return std::move(buffer).str();
}

void write_text_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) fail(ErrorCode::kIo, "write error on " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::kIo, "cannot move " + tmp.string() + " into place: " + ec.message());
}

void append_line(const fs::path& path, std::string_view line) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) fail(ErrorCode::kIo, "cannot append to " + path.string());
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  out.put('\n');
  out.flush();
  if (!out) fail(ErrorCode::kIo, "write error on " + path.string());
}

std::vector<std::string> split(std::string_view text, char delimiter) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    std::size_t end = text.find(delimiter, start);
    if (end == std::string_view::npos) {
      parts.emplace_back(text.substr(start));
      break;
    }
    parts.emplace_back(text.substr(start, end - start));
    start = end + 1;
  }
  return parts;
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    start = end + 1;
  }
  return lines;
}

std::string_view trim(std::string_view text) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
  while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
  return text;
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) fail(ErrorCode::kInternal, "cannot format double");
  return std::string(buf, ptr);
}

double parse_double(std::string_view text) {
  text = trim(text);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    fail(ErrorCode::kInvalidArgument, "not a number: '" + std::string(text) + "'");
  }
  return value;
}

std::int64_t parse_int(std::string_view text) {
  text = trim(text);
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    fail(ErrorCode::kInvalidArgument, "not an integer: '" + std::string(text) + "'");
  }
  return value;
}

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  fail(ErrorCode::kNotFound, "table has no column '" + std::string(name) + "'");
}

std::string format_table(const Table& table, char delimiter) {
  std::string out;
  auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out.push_back(delimiter);
      out += cells[i];
    }
    out.push_back('\n');
  };
  emit(table.header);
  for (const auto& row : table.rows) emit(row);
  return out;
}

Table parse_table(std::string_view text, char delimiter) {
  Table table;
  bool first = true;
  for (const auto& line : split_lines(text)) {
    if (trim(line).empty()) continue;
    auto cells = split(line, delimiter);
    if (first) {
      table.header = std::move(cells);
      first = false;
      continue;
    }
    require(cells.size() == table.header.size(), ErrorCode::kInvalidArgument,
            "row has " + std::to_string(cells.size()) + " cells, header has " +
                std::to_string(table.header.size()));
    table.rows.push_back(std::move(cells));
  }
  require(!first, ErrorCode::kInvalidArgument, "table has no header row");
  return table;
}

void write_table(const fs::path& path, const Table& table, char delimiter) {
  write_text_file(path, format_table(table, delimiter));
}

Table read_table(const fs::path& path, char delimiter) {
  return parse_table(read_text_file(path), delimiter);
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

// Howard Hinnant's days_from_civil / civil_from_days.
namespace {
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}
}  // namespace

YearMonth YearMonth::next() const {
  return month == 12 ? YearMonth{year + 1, 1} : YearMonth{year, month + 1};
}

YearMonth utc_year_month(std::int64_t epoch_seconds) {
  std::int64_t z = epoch_seconds / 86400;
  if (epoch_seconds % 86400 < 0) --z;
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  return YearMonth{static_cast<int>(y + (m <= 2)), static_cast<int>(m)};
}

YearMonth parse_year_month(std::string_view text) {
  auto parts = split(trim(text), '-');
  require(parts.size() == 2, ErrorCode::kInvalidArgument,
          "expected YYYY-MM, got '" + std::string(text) + "'");
  YearMonth ym{static_cast<int>(parse_int(parts[0])), static_cast<int>(parse_int(parts[1]))};
  require(ym.month >= 1 && ym.month <= 12, ErrorCode::kInvalidArgument,
          "month out of range in '" + std::string(text) + "'");
  return ym;
}

std::string to_string(const YearMonth& ym) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d", ym.year, ym.month);
  return buf;
}

std::int64_t epoch_seconds(int year, int month, int day) {
  return days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day)) * 86400;
}

}  // namespace qaexpert::io
