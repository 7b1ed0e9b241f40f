#include "mf/io/csv.hpp"

#include <boost/tokenizer.hpp>
#include <charconv>
#include <fstream>
#include <sstream>

#include "mf/error.hpp"
#include "mf/io/ini.hpp"

namespace mf::io {

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw DataError("csv: missing column '" + name + "'");
}

bool CsvTable::has_column(const std::string& name) const {
  for (const auto& h : header) {
    if (h == name) return true;
  }
  return false;
}

CsvTable parse_csv(const std::string& text) {
  using Tokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;
  CsvTable table;
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::vector<std::string> fields;
    try {
      Tokenizer tok(line);
      for (const auto& f : tok) fields.push_back(trim(f));
    } catch (const boost::escaped_list_error& e) {
      throw DataError("csv line " + std::to_string(line_no) + ": " + e.what());
    }
    if (table.header.empty()) {
      table.header = std::move(fields);
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw DataError("csv line " + std::to_string(line_no) + ": expected " + std::to_string(table.header.size()) +
                      " fields, found " + std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  if (table.header.empty()) throw DataError("csv: no header row");
  return table;
}

CsvTable read_csv(const std::string& path) {
  try {
    return parse_csv(read_text(path));
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

double parse_double(const std::string& field, const std::string& context) {
  double v = 0.0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end) throw DataError(context + ": '" + field + "' is not a number");
  return v;
}

long long parse_int(const std::string& field, const std::string& context) {
  long long v = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end) throw DataError(context + ": '" + field + "' is not an integer");
  return v;
}

std::string format_exact(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

std::string read_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + path);
  os << text;
  if (!os) throw DataError("failed writing " + path);
}

}  // namespace mf::io
