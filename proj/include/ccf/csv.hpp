#pragma once

#include <optional>
#include <string>
#include <vector>

namespace ccf::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 if absent
};

/// Parse a CSV document. UTF-8, header row required, minimal quoting
/// support ("" escapes inside quoted fields).
Table parse(const std::string& text);

Table read_file(const std::string& path);

void write_file(const std::string& path, const Table& table);

std::string format(const Table& table);

/// Fixed 6-significant-digit rendering used for all numeric CSV output
/// so repeated runs are byte-identical.
std::string fmt_g6(double v);

std::optional<long> parse_long(const std::string& s);
std::optional<double> parse_double(const std::string& s);

}  // namespace ccf::csv
