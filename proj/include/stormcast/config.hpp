#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stormcast/core.hpp"

namespace stormcast {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Sectioned key-value configuration ("[section]" headers, "key = value"
// lines, '#' comments). Insertion order is preserved so parse -> serialize
// -> parse is the identity.
class Config {
 public:
  void set(const std::string& section, const std::string& key,
           const std::string& value) {
    auto& sec = section_for(section);
    for (auto& [k, v] : sec.entries)
      if (k == key) {
        v = value;
        return;
      }
    sec.entries.emplace_back(key, value);
  }

  bool has(const std::string& section, const std::string& key) const {
    const auto* sec = find_section(section);
    if (!sec) return false;
    for (const auto& [k, v] : sec->entries)
      if (k == key) return true;
    return false;
  }

  std::string get(const std::string& section, const std::string& key) const {
    const auto* sec = find_section(section);
    if (sec)
      for (const auto& [k, v] : sec->entries)
        if (k == key) return v;
    throw ConfigError("missing config key [" + section + "] " + key);
  }

  std::string get_or(const std::string& section, const std::string& key,
                     const std::string& fallback) const {
    return has(section, key) ? get(section, key) : fallback;
  }

  double get_double(const std::string& section, const std::string& key) const {
    const std::string v = get(section, key);
    try {
      std::size_t pos = 0;
      double d = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw ConfigError("config key [" + section + "] " + key +
                        ": expected number, got '" + v + "'");
    }
  }

  double get_double_or(const std::string& section, const std::string& key,
                       double fallback) const {
    return has(section, key) ? get_double(section, key) : fallback;
  }

  long long get_int(const std::string& section, const std::string& key) const {
    const std::string v = get(section, key);
    try {
      std::size_t pos = 0;
      long long i = std::stoll(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return i;
    } catch (const std::exception&) {
      throw ConfigError("config key [" + section + "] " + key +
                        ": expected integer, got '" + v + "'");
    }
  }

  long long get_int_or(const std::string& section, const std::string& key,
                       long long fallback) const {
    return has(section, key) ? get_int(section, key) : fallback;
  }

  bool get_bool(const std::string& section, const std::string& key) const {
    std::string v = get(section, key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key [" + section + "] " + key +
                      ": expected boolean, got '" + v + "'");
  }

  bool get_bool_or(const std::string& section, const std::string& key,
                   bool fallback) const {
    return has(section, key) ? get_bool(section, key) : fallback;
  }

  std::int64_t get_utc(const std::string& section, const std::string& key) const {
    std::int64_t t;
    const std::string v = get(section, key);
    if (!parse_utc(v, t))
      throw ConfigError("config key [" + section + "] " + key +
                        ": expected ISO-8601 UTC timestamp, got '" + v + "'");
    return t;
  }

  std::vector<int> get_int_list(const std::string& section,
                                const std::string& key) const {
    std::vector<int> out;
    std::stringstream ss(get(section, key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        out.push_back(std::stoi(item));
      } catch (const std::exception&) {
        throw ConfigError("config key [" + section + "] " + key +
                          ": expected comma-separated integers");
      }
    }
    return out;
  }

  std::vector<std::string> section_names() const {
    std::vector<std::string> out;
    for (const auto& s : sections_) out.push_back(s.name);
    return out;
  }

  std::vector<std::pair<std::string, std::string>> entries(
      const std::string& section) const {
    const auto* sec = find_section(section);
    return sec ? sec->entries
               : std::vector<std::pair<std::string, std::string>>{};
  }

  std::string serialize() const {
    std::ostringstream out;
    bool first = true;
    for (const auto& sec : sections_) {
      if (!first) out << "\n";
      first = false;
      out << "[" << sec.name << "]\n";
      for (const auto& [k, v] : sec.entries) out << k << " = " << v << "\n";
    }
    return out.str();
  }

  static Config parse(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string s = trim(line);
      if (s.empty() || s[0] == '#') continue;
      if (s.front() == '[') {
        if (s.back() != ']')
          throw ConfigError("config line " + std::to_string(line_no) +
                            ": unterminated section header");
        section = trim(s.substr(1, s.size() - 2));
        cfg.section_for(section);
        continue;
      }
      auto eq = s.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": expected 'key = value', got '" + s + "'");
      std::string key = trim(s.substr(0, eq));
      std::string value = trim(s.substr(eq + 1));
      if (key.empty())
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": empty key");
      cfg.set(section, key, value);
    }
    return cfg;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write config file " + path);
    out << serialize();
  }

 private:
  struct Section {
    std::string name;
    std::vector<std::pair<std::string, std::string>> entries;
  };

  static std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    std::size_t e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
  }

  Section& section_for(const std::string& name) {
    for (auto& s : sections_)
      if (s.name == name) return s;
    sections_.push_back({name, {}});
    return sections_.back();
  }

  const Section* find_section(const std::string& name) const {
    for (const auto& s : sections_)
      if (s.name == name) return &s;
    return nullptr;
  }

  std::vector<Section> sections_;
};

}  // namespace stormcast
