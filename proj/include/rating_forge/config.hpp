#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rating_forge/core_model.hpp"

namespace rf {

// Flat key=value text with optional [section] headers; keys are stored as "section.key".
class Config {
 public:
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key, long fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;

  // FNV-1a over the canonical "key=value\n" listing
  std::string hash() const;
  const std::map<std::string, std::string>& values() const { return values_; }

  GameParams game_params() const;
  RatingUpdateRule rule() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace rf
