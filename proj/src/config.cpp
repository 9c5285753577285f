#include "rating_forge/config.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <boost/algorithm/string/trim.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace rf {

Config Config::parse(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ValidationError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  Config cfg;
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      cfg.values_[name] = node.data();
      continue;
    }
    for (const auto& [key, leaf] : node) cfg.values_[name + "." + key] = leaf.data();
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

std::string Config::get(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    size_t used = 0;
    double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ValidationError("config key '" + key + "' is not a number: " + it->second);
  }
}

long Config::get_int(const std::string& key, long fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    size_t used = 0;
    long v = std::stol(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ValidationError("config key '" + key + "' is not an integer: " + it->second);
  }
}

std::vector<double> Config::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  std::stringstream ss(it->second);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    boost::algorithm::trim(tok);
    if (tok.empty()) continue;
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ValidationError("config key '" + key + "' has a non-numeric entry: " + tok);
    }
  }
  return out;
}

std::string Config::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& [k, v] : values_) {
    for (char ch : k + "=" + v + "\n") {
      h ^= static_cast<unsigned char>(ch);
      h *= 1099511628211ull;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

GameParams Config::game_params() const {
  GameParams p;
  p.n_users = int(get_int("game.n_users", p.n_users));
  p.benefit = get_double("game.benefit", p.benefit);
  p.cost = get_double("game.cost", p.cost);
  p.report_error = get_double("game.report_error", p.report_error);
  p.discount = get_double("game.discount", p.discount);
  return p;
}

RatingUpdateRule Config::rule() const {
  return RatingUpdateRule::make(get_double("rule.beta1_up", 0.95), get_double("rule.beta1_down", 0.3),
                                get_double("rule.beta0_up", 0.6), get_double("rule.beta0_down", 0.8));
}

}  // namespace rf
