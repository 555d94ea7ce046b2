#include "enl/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace enl {
namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::parse(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw InvalidArgument("config line " + std::to_string(lineno) +
                              ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument("config line " + std::to_string(lineno) +
                            ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw InvalidArgument("config line " + std::to_string(lineno) + ": empty key");
    if (!section.empty()) key = section + "." + key;
    cfg.entries_[key] = value;
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void Config::set(const std::string& key, const std::string& value) {
  entries_[key] = value;
}

bool Config::has(const std::string& key) const { return entries_.count(key) > 0; }

std::string Config::get_string(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw InvalidArgument("missing config key: " + key);
  return it->second;
}

std::string Config::get_string(const std::string& key,
                               const std::string& fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

long Config::get_long(const std::string& key) const {
  const std::string v = get_string(key);
  char* end = nullptr;
  const long out = std::strtol(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    throw InvalidArgument("config key " + key + ": not an integer: " + v);
  return out;
}

long Config::get_long(const std::string& key, long fallback) const {
  return has(key) ? get_long(key) : fallback;
}

double Config::get_double(const std::string& key) const {
  const std::string v = get_string(key);
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    throw InvalidArgument("config key " + key + ": not a number: " + v);
  return out;
}

double Config::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get_string(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InvalidArgument("config key " + key + ": not a boolean: " + v);
}

std::string Config::serialize() const {
  std::ostringstream out;
  for (const auto& [k, v] : entries_) out << k << "=" << v << "\n";
  return out.str();
}

}  // namespace enl
