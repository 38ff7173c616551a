#pragma once

// Flat `key=value` text files: one entry per line, `#` starts a comment,
// blank lines ignored. Used for model parameters, scenario and grid configs.

#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mirrorspoof/errors.hpp"
#include "mirrorspoof/point_cloud.hpp"

namespace mirrorspoof {

class KeyValueFile {
 public:
  struct Entry {
    std::string value;
    std::size_t line = 0;
  };

  static KeyValueFile parse(std::istream& is, const std::string& name = "<config>") {
    KeyValueFile f;
    f.name_ = name;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(is, raw)) {
      ++line_no;
      const auto hash = raw.find('#');
      const std::string line = csv::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw InputError(name + ":" + std::to_string(line_no) + ": expected key=value, got '" + line + "'");
      }
      const std::string key = csv::trim(line.substr(0, eq));
      const std::string value = csv::trim(line.substr(eq + 1));
      if (key.empty()) throw InputError(name + ":" + std::to_string(line_no) + ": empty key");
      if (f.entries_.count(key)) {
        throw InputError(name + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
      }
      f.entries_[key] = {value, line_no};
      f.order_.push_back(key);
    }
    return f;
  }

  static KeyValueFile parse_string(const std::string& text, const std::string& name = "<config>") {
    std::istringstream is(text);
    return parse(is, name);
  }

  static KeyValueFile load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file '" + path + "'");
    return parse(in, path);
  }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  const std::string& name() const { return name_; }
  const std::vector<std::string>& keys() const { return order_; }

  void reject_unknown(const std::set<std::string>& allowed) const {
    for (const auto& k : order_) {
      if (!allowed.count(k)) {
        throw InputError(where(k) + ": unknown key '" + k + "'");
      }
    }
  }

  void require_all(const std::set<std::string>& required) const {
    for (const auto& k : required) {
      if (!has(k)) throw InputError(name_ + ": missing key '" + k + "'");
    }
  }

  double get_double(const std::string& key) const {
    return csv::parse_double(at(key).value, where(key));
  }

  long long get_int(const std::string& key) const { return csv::parse_int(at(key).value, where(key)); }

  bool get_bool(const std::string& key) const {
    const std::string& v = at(key).value;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw InputError(where(key) + ": expected a boolean, got '" + v + "'");
  }

  const std::string& get_string(const std::string& key) const { return at(key).value; }

  void read(const std::string& key, double& out) const {
    if (has(key)) out = get_double(key);
  }
  void read(const std::string& key, int& out) const {
    if (has(key)) out = static_cast<int>(get_int(key));
  }
  void read(const std::string& key, bool& out) const {
    if (has(key)) out = get_bool(key);
  }

 private:
  const Entry& at(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw InputError(name_ + ": missing key '" + key + "'");
    return it->second;
  }
  std::string where(const std::string& key) const {
    const auto it = entries_.find(key);
    return name_ + ":" + std::to_string(it == entries_.end() ? 0 : it->second.line);
  }

  std::string name_;
  std::map<std::string, Entry> entries_;
  std::vector<std::string> order_;
};

}  // namespace mirrorspoof
