#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

// Minimal comma-separated reading/writing shared by the file formats.
namespace p2p::csv {

std::vector<std::string_view> split(std::string_view line);

/// Parses a decimal number; accepts "NaN"/"nan". Throws DataError citing
/// `where` on failure.
double parse_double(std::string_view field, const std::string& where);
long long parse_int(std::string_view field, const std::string& where);

/// Shortest text that reads back to the identical double; NaN prints as "NaN".
std::string format_double(double value);

/// Reads the next line, stripping a trailing '\r'. Returns false at EOF.
bool read_line(std::istream& in, std::string& line);

}  // namespace p2p::csv
