#include "fern/csv.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace fern::io {

namespace {

[[noreturn]] void fail(const std::string& what) {
  throw std::runtime_error("csv: " + what);
}

}  // namespace

CsvTable parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  bool at_field_start = true;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    at_field_start = true;
    field_was_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(record));
    record.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!at_field_start) fail("stray quote inside unquoted field");
        in_quotes = true;
        field_was_quoted = true;
        at_field_start = false;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 >= text.size() || text[i + 1] != '\n') {
          fail("bare carriage return");
        }
        break;
      case '\n':
        end_record();
        break;
      default:
        if (field_was_quoted) fail("data after closing quote");
        field.push_back(c);
        at_field_start = false;
        break;
    }
  }
  if (in_quotes) fail("unterminated quoted field");
  if (!field.empty() || !record.empty() || at_field_start == false) {
    // Final record without a trailing newline.
    end_record();
  }

  if (records.empty()) fail("empty input");
  CsvTable table;
  table.header = std::move(records.front());
  const std::size_t width = table.header.size();
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != width) {
      fail("row " + std::to_string(r) + " has " +
           std::to_string(records[r].size()) + " fields, header has " +
           std::to_string(width));
    }
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

std::string csv_field(std::string_view raw) {
  const bool needs_quotes =
      raw.find_first_of(",\"\r\n") != std::string_view::npos;
  if (!needs_quotes) return std::string(raw);
  std::string out = "\"";
  for (char c : raw) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += '"';
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(std::string_view text) {
  std::size_t b = 0, e = text.size();
  while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
  const std::string_view t = text.substr(b, e - b);
  if (t == "inf") return std::numeric_limits<double>::infinity();
  if (t == "-inf") return -std::numeric_limits<double>::infinity();
  if (t == "nan" || t == "-nan") {
    return std::numeric_limits<double>::quiet_NaN();
  }
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || ptr != t.data() + t.size()) {
    fail("cannot parse number from '" + std::string(text) + "'");
  }
  return out;
}

}  // namespace fern::io
