#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace mf::io {

/// Sectioned key/value text ("[section]" headers, "key = value" lines).
/// Section and key order is preserved.
class IniDocument {
 public:
  using Section = std::vector<std::pair<std::string, std::string>>;

  static IniDocument parse(const std::string& text);
  static IniDocument load(const std::string& path);

  bool has_section(const std::string& name) const;
  std::vector<std::string> section_names() const;
  const Section& section(const std::string& name) const;

  void set(const std::string& section, const std::string& key, const std::string& value);
  std::string to_text() const;

  friend bool operator==(const IniDocument&, const IniDocument&) = default;

 private:
  std::vector<std::pair<std::string, Section>> sections_;
};

/// Typed access to one section that rejects keys nobody asked for.
class SectionReader {
 public:
  SectionReader(const IniDocument& doc, std::string section);

  bool present() const { return present_; }
  std::optional<std::string> raw(const std::string& key);
  std::string get_string(const std::string& key, const std::string& fallback);
  std::int64_t get_int(const std::string& key, std::int64_t fallback);
  double get_double(const std::string& key, double fallback);
  bool get_bool(const std::string& key, bool fallback);
  std::vector<std::int64_t> get_int_list(const std::string& key, const std::vector<std::int64_t>& fallback);
  std::vector<std::string> get_list(const std::string& key, char sep, const std::vector<std::string>& fallback);

  /// Throws ConfigError if the section holds keys that were never read.
  void finish() const;

 private:
  std::string name_;
  bool present_ = false;
  std::map<std::string, std::string> values_;
  std::set<std::string> consumed_;
};

std::vector<std::string> split(const std::string& s, char sep);
std::string trim(const std::string& s);
std::string format_double(double v);

}  // namespace mf::io
