#include "npswab/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace npswab {

namespace {

std::string trim(const std::string& s) {
  std::size_t begin = 0;
  std::size_t end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) {
    ++begin;
  }
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) {
    --end;
  }
  return s.substr(begin, end - begin);
}

}  // namespace

KeyValueFile KeyValueFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError(path + ": cannot open file");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_string(buffer.str(), path);
}

KeyValueFile KeyValueFile::from_string(const std::string& text,
                                       const std::string& name) {
  KeyValueFile kv;
  kv.name_ = name;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(name + ":" + std::to_string(line_no) +
                        ": expected `key = value`, got \"" + line + "\"");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(name + ":" + std::to_string(line_no) +
                        ": empty key before `=`");
    }
    if (value.empty()) {
      throw ConfigError(name + ":" + std::to_string(line_no) +
                        ": empty value for key \"" + key + "\"");
    }
    auto [it, inserted] = kv.entries_.emplace(key, Entry{value, line_no});
    if (!inserted) {
      throw ConfigError(name + ":" + std::to_string(line_no) +
                        ": duplicate key \"" + key + "\" (first seen at line " +
                        std::to_string(it->second.line) + ")");
    }
  }
  return kv;
}

bool KeyValueFile::has(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    return false;
  }
  it->second.consumed = true;
  return true;
}

void KeyValueFile::fail(const std::string& key,
                        const std::string& message) const {
  auto it = entries_.find(key);
  const std::string where =
      it == entries_.end()
          ? name_
          : name_ + ":" + std::to_string(it->second.line);
  throw ConfigError(where + ": key \"" + key + "\" " + message);
}

const KeyValueFile::Entry& KeyValueFile::require(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    throw ConfigError(name_ + ": missing required key \"" + key + "\"");
  }
  it->second.consumed = true;
  return it->second;
}

std::string KeyValueFile::get_string(const std::string& key) const {
  return require(key).value;
}

double KeyValueFile::get_double(const std::string& key) const {
  const Entry& entry = require(key);
  std::istringstream in(entry.value);
  double value = 0.0;
  std::string rest;
  if (!(in >> value) || (in >> rest)) {
    fail(key, "is not a number: \"" + entry.value + "\"");
  }
  return value;
}

int KeyValueFile::get_int(const std::string& key) const {
  const Entry& entry = require(key);
  std::istringstream in(entry.value);
  long long value = 0;
  std::string rest;
  if (!(in >> value) || (in >> rest)) {
    fail(key, "is not an integer: \"" + entry.value + "\"");
  }
  return static_cast<int>(value);
}

Eigen::Vector3d KeyValueFile::get_vec3(const std::string& key) const {
  const std::vector<double> v = get_doubles(key, 3);
  return Eigen::Vector3d(v[0], v[1], v[2]);
}

std::vector<double> KeyValueFile::get_doubles(const std::string& key,
                                              std::size_t count) const {
  const Entry& entry = require(key);
  std::istringstream in(entry.value);
  std::vector<double> values;
  double v = 0.0;
  while (in >> v) {
    values.push_back(v);
  }
  if (!in.eof() || values.size() != count) {
    fail(key, "expected " + std::to_string(count) + " numbers, got \"" +
                  entry.value + "\"");
  }
  return values;
}

double KeyValueFile::get_double_or(const std::string& key,
                                   double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

int KeyValueFile::get_int_or(const std::string& key, int fallback) const {
  return has(key) ? get_int(key) : fallback;
}

Eigen::Vector3d KeyValueFile::get_vec3_or(const std::string& key,
                                          const Eigen::Vector3d& fallback) const {
  return has(key) ? get_vec3(key) : fallback;
}

void KeyValueFile::check_all_consumed() const {
  std::string unknown;
  for (const auto& [key, entry] : entries_) {
    if (!entry.consumed) {
      if (!unknown.empty()) {
        unknown += ", ";
      }
      unknown += "\"" + key + "\" (line " + std::to_string(entry.line) + ")";
    }
  }
  if (!unknown.empty()) {
    throw ConfigError(name_ + ": unrecognized keys: " + unknown);
  }
}

}  // namespace npswab
