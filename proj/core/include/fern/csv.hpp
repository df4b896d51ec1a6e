#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fern::io {

// RFC 4180 comma-separated table: quoted fields, doubled quotes inside
// quotes, LF or CRLF line ends. The first record is the header.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);

// Quotes a field only when it needs quoting.
std::string csv_field(std::string_view raw);

// Shortest round-trip decimal form of a double ("%.17g"); also prints
// inf/-inf/nan, which parse_double accepts back.
std::string format_double(double v);
double parse_double(std::string_view text);

}  // namespace fern::io
