#pragma once

#include <cstdint>
#include <vector>

#include "rating_forge/core_model.hpp"

namespace rf {

struct RhoResult {
  double value = 0.0;
  bool violated = false;  // some detection gap is not positive
  double min_gap = 0.0;
};

// Largest ratio of skipped-service probability to detection gap over present ratings and the three
// shirking deviations. Subset bit k marks next-state s1 = k as punished.
RhoResult rho(const RatingDistribution& s, const Plan& recommended, std::uint32_t punished_mask,
              const RatingUpdateRule& rule, const GameParams& params);

struct BoundResult {
  double zeta = 0.0;
  double normalized_bound = 0.0;  // (b - c - zeta) / (b - c)
  bool found = false;
  Plan argmin_plan;
  int argmin_s1 = -1;
  std::uint32_t argmin_mask = 0;
  double rho = 0.0;
  double punished_mass = 0.0;
  long subsets_checked = 0;
  long subsets_feasible = 0;
};

struct BoundOptions {
  bool all_plans = false;  // recommended plan over all 16 instead of altruistic/selfish
  bool reverse_order = false;
  int threads = 0;
};

// Minimum over current distributions, recommended plans and punished subsets of c * rho * P(punished).
BoundResult zeta(const GameParams& params, const RatingUpdateRule& rule, const BoundOptions& opt = {});

// Same minimum taken also over a rule grid with the given step.
BoundResult zeta_over_rules(const GameParams& params, double grid_step, const BoundOptions& opt = {},
                            RatingUpdateRule* argmin_rule = nullptr);

}  // namespace rf
