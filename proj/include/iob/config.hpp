#pragma once

#include <map>
#include <set>
#include <string>

namespace iob {

// Flat INI-style config: [section] headers, key=value lines, '#' comments.
// Lookups use "section.key". Unknown keys are rejected against the set of
// keys each command registers.
class IniConfig {
 public:
  static IniConfig load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string get(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key, double fallback) const;

  // Throws if any stored key outside `section` prefixes is not in `known`.
  void validate(const std::string& section, const std::set<std::string>& known) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace iob
