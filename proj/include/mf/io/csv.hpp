#pragma once

#include <string>
#include <vector>

namespace mf::io {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column; throws DataError if absent.
  std::size_t column(const std::string& name) const;
  bool has_column(const std::string& name) const;
};

/// Comma-separated text with a header row. Quoted fields may contain commas.
/// Every row must have as many fields as the header.
CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::string& path);

double parse_double(const std::string& field, const std::string& context);
long long parse_int(const std::string& field, const std::string& context);

/// Shortest text that parses back to the same double.
std::string format_exact(double v);

std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);

}  // namespace mf::io
