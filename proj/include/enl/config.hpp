#pragma once

// Flat key=value config files with [section] headers.  A key "k" inside
// [sec] becomes "sec.k"; there is deliberately no nesting beyond that.

#include <map>
#include <optional>
#include <string>

#include "enl/hyperparams.hpp"

namespace enl {

class Config {
 public:
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  long get_long(const std::string& key) const;
  long get_long(const std::string& key, long fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Canonical text form: sorted keys, one per line, no sections.
  std::string serialize() const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace enl
