#pragma once

// Minimal RFC-4180 style reader/writer shared by the portfolio and triangle
// formats. Internal to the library.

#include <charconv>
#include <string>
#include <string_view>
#include <vector>

namespace hrm::csv {

using Row = std::vector<std::string>;

/// Splits text into rows of fields. Quoted fields may contain commas and
/// doubled quotes; a trailing newline does not create an empty row.
std::vector<Row> parse(std::string_view text);

std::string quote_if_needed(std::string_view field);

/// Shortest representation that round-trips bit-exactly.
std::string format_double(double v);

bool parse_double(std::string_view s, double& out);
bool parse_int(std::string_view s, long& out);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace hrm::csv
