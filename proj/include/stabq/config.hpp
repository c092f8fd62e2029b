#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "stabq/experiments.hpp"
#include "stabq/format.hpp"

namespace stabq {

struct ParsedConfig {
  ExperimentConfig cfg;
  std::vector<std::string> warnings;
};

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["family"] = c.family;
  j["dimension"] = c.dimension;
  j["k"] = c.k;
  j["epsilon"] = c.epsilon;
  j["extended_R"] = c.extended_R;
  j["n_ladder"] = c.n_ladder;
  j["replicates"] = c.replicates;
  j["seed"] = c.seed;
  j["c_stab"] = c.c_stab;
  j["c_star"] = c.c_star;
  j["alpha_stab"] = c.alpha_stab;
  j["p"] = c.p;
  j["p0"] = c.p0;
  j["p1"] = c.p1;
  j["p_grid_step"] = c.p_grid_step;
  j["ks_threshold"] = c.ks_threshold;
  j["slope_lo"] = c.slope_lo;
  j["slope_hi"] = c.slope_hi;
  j["slope_separation"] = c.slope_separation;
  j["ad_alpha"] = c.ad_alpha;
  j["var_ratio_lo"] = c.var_ratio_lo;
  j["var_ratio_hi"] = c.var_ratio_hi;
  j["out_dir"] = c.out_dir;
  j["svg"] = c.svg;
  return j;
}

namespace detail {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw std::invalid_argument(std::string("config: field '") + key + "' has the wrong type");
  }
}

}  // namespace detail

// Strict parse: unknown keys are rejected, invariants are checked with
// field-level messages, and sub-threshold c_star is recorded as a warning
// (the run proceeds).
inline ParsedConfig parse_config_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config: top level must be a JSON object");
  static const std::set<std::string> known = {
      "family",      "dimension",   "k",           "epsilon",          "extended_R",
      "n_ladder",    "replicates",  "seed",        "c_stab",           "c_star",
      "alpha_stab",  "p",           "p0",          "p1",               "p_grid_step",
      "ks_threshold", "slope_lo",   "slope_hi",    "slope_separation", "ad_alpha",
      "var_ratio_lo", "var_ratio_hi", "out_dir",   "svg"};
  std::string unknown;
  for (const auto& item : j.items()) {
    if (!known.contains(item.key())) unknown += (unknown.empty() ? "" : ", ") + item.key();
  }
  if (!unknown.empty())
    throw std::invalid_argument("config: unknown keys rejected: " + unknown);

  ParsedConfig out;
  ExperimentConfig& c = out.cfg;
  detail::read_field(j, "family", c.family);
  detail::read_field(j, "dimension", c.dimension);
  detail::read_field(j, "k", c.k);
  detail::read_field(j, "epsilon", c.epsilon);
  detail::read_field(j, "extended_R", c.extended_R);
  detail::read_field(j, "n_ladder", c.n_ladder);
  detail::read_field(j, "replicates", c.replicates);
  detail::read_field(j, "seed", c.seed);
  detail::read_field(j, "c_stab", c.c_stab);
  detail::read_field(j, "c_star", c.c_star);
  detail::read_field(j, "alpha_stab", c.alpha_stab);
  detail::read_field(j, "p", c.p);
  detail::read_field(j, "p0", c.p0);
  detail::read_field(j, "p1", c.p1);
  detail::read_field(j, "p_grid_step", c.p_grid_step);
  detail::read_field(j, "ks_threshold", c.ks_threshold);
  detail::read_field(j, "slope_lo", c.slope_lo);
  detail::read_field(j, "slope_hi", c.slope_hi);
  detail::read_field(j, "slope_separation", c.slope_separation);
  detail::read_field(j, "ad_alpha", c.ad_alpha);
  detail::read_field(j, "var_ratio_lo", c.var_ratio_lo);
  detail::read_field(j, "var_ratio_hi", c.var_ratio_hi);
  detail::read_field(j, "out_dir", c.out_dir);
  detail::read_field(j, "svg", c.svg);
  c.validate();

  if (c.c_star > 0.0 && c.c_star < 4.0 / c.c_stab_eff()) {
    out.warnings.push_back("c_star=" + format_double(c.c_star) +
                           " is below the lower bound 4/c_stab=" +
                           format_double(4.0 / c.c_stab_eff()) +
                           "; proceeding (the bound is sufficient, not necessary)");
  }
  return out;
}

inline ParsedConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config: malformed JSON in '" + path + "': " + e.what());
  }
  return parse_config_json(j);
}

// Stable across key reordering: nlohmann::json objects iterate in sorted key
// order, so the canonical dump is reorder-invariant.
inline std::string config_hash(const ExperimentConfig& cfg) {
  return fnv1a_hex(config_to_json(cfg).dump());
}

}  // namespace stabq
