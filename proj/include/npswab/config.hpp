#pragma once

#include <Eigen/Core>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "npswab/errors.hpp"

namespace npswab {

/// Minimal `key = value` file reader shared by the chain and scene loaders.
///
/// Grammar: one `key = value` pair per line; `#` starts a comment; blank
/// lines ignored. Values are whitespace-separated scalars. Every diagnostic
/// carries file:line so malformed inputs are easy to locate.
class KeyValueFile {
 public:
  static KeyValueFile load(const std::string& path);
  static KeyValueFile from_string(const std::string& text,
                                  const std::string& name = "<memory>");

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key) const;
  double get_double(const std::string& key) const;
  int get_int(const std::string& key) const;
  Eigen::Vector3d get_vec3(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key,
                                  std::size_t count) const;

  /// Fallback-returning variants for optional keys.
  double get_double_or(const std::string& key, double fallback) const;
  int get_int_or(const std::string& key, int fallback) const;
  Eigen::Vector3d get_vec3_or(const std::string& key,
                              const Eigen::Vector3d& fallback) const;

  /// Throws ConfigError listing any keys never read back. Catches typos.
  void check_all_consumed() const;

  const std::string& name() const { return name_; }

 private:
  struct Entry {
    std::string value;
    int line = 0;
    mutable bool consumed = false;
  };

  [[noreturn]] void fail(const std::string& key,
                         const std::string& message) const;
  const Entry& require(const std::string& key) const;

  std::string name_;
  std::map<std::string, Entry> entries_;
};

}  // namespace npswab
