#include "mf/io/ini.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mf/error.hpp"

namespace mf::io {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

IniDocument IniDocument::parse(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::ini_parser::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  IniDocument doc;
  for (const auto& [name, sub] : tree) {
    if (sub.empty() && !sub.data().empty()) {
      throw ConfigError("config key '" + name + "' appears outside any section");
    }
    Section sec;
    for (const auto& [key, value] : sub) sec.emplace_back(key, trim(value.data()));
    doc.sections_.emplace_back(name, std::move(sec));
  }
  return doc;
}

IniDocument IniDocument::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

bool IniDocument::has_section(const std::string& name) const {
  for (const auto& s : sections_)
    if (s.first == name) return true;
  return false;
}

std::vector<std::string> IniDocument::section_names() const {
  std::vector<std::string> out;
  for (const auto& s : sections_) out.push_back(s.first);
  return out;
}

const IniDocument::Section& IniDocument::section(const std::string& name) const {
  for (const auto& s : sections_)
    if (s.first == name) return s.second;
  throw ConfigError("missing config section [" + name + "]");
}

void IniDocument::set(const std::string& section, const std::string& key, const std::string& value) {
  for (auto& s : sections_) {
    if (s.first != section) continue;
    for (auto& kv : s.second) {
      if (kv.first == key) {
        kv.second = value;
        return;
      }
    }
    s.second.emplace_back(key, value);
    return;
  }
  sections_.push_back({section, Section{{key, value}}});
}

std::string IniDocument::to_text() const {
  std::ostringstream os;
  bool first = true;
  for (const auto& [name, sec] : sections_) {
    if (!first) os << '\n';
    first = false;
    os << '[' << name << "]\n";
    for (const auto& [k, v] : sec) os << k << " = " << v << '\n';
  }
  return os.str();
}

SectionReader::SectionReader(const IniDocument& doc, std::string section) : name_(std::move(section)) {
  if (!doc.has_section(name_)) return;
  present_ = true;
  for (const auto& [k, v] : doc.section(name_)) values_[k] = v;
}

std::optional<std::string> SectionReader::raw(const std::string& key) {
  consumed_.insert(key);
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string SectionReader::get_string(const std::string& key, const std::string& fallback) {
  return raw(key).value_or(fallback);
}

std::int64_t SectionReader::get_int(const std::string& key, std::int64_t fallback) {
  auto v = raw(key);
  if (!v) return fallback;
  try {
    std::size_t pos = 0;
    const auto r = std::stoll(*v, &pos);
    if (pos != v->size()) throw std::invalid_argument(*v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("[" + name_ + "] " + key + ": expected an integer, got '" + *v + "'");
  }
}

double SectionReader::get_double(const std::string& key, double fallback) {
  auto v = raw(key);
  if (!v) return fallback;
  try {
    std::size_t pos = 0;
    const auto r = std::stod(*v, &pos);
    if (pos != v->size()) throw std::invalid_argument(*v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("[" + name_ + "] " + key + ": expected a number, got '" + *v + "'");
  }
}

bool SectionReader::get_bool(const std::string& key, bool fallback) {
  auto v = raw(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw ConfigError("[" + name_ + "] " + key + ": expected a boolean, got '" + *v + "'");
}

std::vector<std::int64_t> SectionReader::get_int_list(const std::string& key,
                                                      const std::vector<std::int64_t>& fallback) {
  auto v = raw(key);
  if (!v) return fallback;
  std::vector<std::int64_t> out;
  for (const auto& item : split(*v, ',')) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stoll(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("[" + name_ + "] " + key + ": expected integers, got '" + *v + "'");
    }
  }
  return out;
}

std::vector<std::string> SectionReader::get_list(const std::string& key, char sep,
                                                 const std::vector<std::string>& fallback) {
  auto v = raw(key);
  if (!v) return fallback;
  return split(*v, sep);
}

void SectionReader::finish() const {
  std::string unknown;
  for (const auto& [k, v] : values_) {
    if (!consumed_.count(k)) unknown += (unknown.empty() ? "" : ", ") + k;
  }
  if (!unknown.empty()) throw ConfigError("unknown key(s) in [" + name_ + "]: " + unknown);
}

}  // namespace mf::io
