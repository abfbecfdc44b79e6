#pragma once

#include <set>
#include <string>
#include <utility>

#include "dynshop/model.hpp"

namespace dynshop::detail {

// Strict object reader: every key must be consumed, unknown keys fail with
// the full field path.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ParseError(path_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& at(const std::string& key) {
    auto it = j_.find(key);
    if (it == j_.end()) throw ParseError(path_ + "." + key, "missing field");
    seen_.insert(key);
    return *it;
  }

  const json* maybe(const std::string& key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  template <typename T>
  T get(const std::string& key) {
    return cast<T>(at(key), path_ + "." + key);
  }

  template <typename T>
  T get_or(const std::string& key, T fallback) {
    const json* v = maybe(key);
    if (!v) return fallback;
    return cast<T>(*v, path_ + "." + key);
  }

  std::string child(const std::string& key) const { return path_ + "." + key; }

  void finish() {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key()))
        throw ParseError(path_ + "." + it.key(), "unknown field");
    }
  }

  template <typename T>
  static T cast(const json& v, const std::string& path) {
    try {
      return v.get<T>();
    } catch (const json::exception& e) {
      throw ParseError(path, e.what());
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace dynshop::detail
