#pragma once

#include <array>
#include <string>
#include <vector>

#include "rating_forge/core_model.hpp"

namespace rf {

struct ConditionReport {
  bool ordering = false;      // following the plan raises the rating, both ratings
  bool high_retention = false;
  bool low_promotion = false;
  double ordering_slack = 0.0;
  double high_retention_slack = 0.0;
  double low_promotion_slack = 0.0;
  bool all() const { return ordering && high_retention && low_promotion; }
};

ConditionReport check_conditions(const RatingUpdateRule& rule, const GameParams& params);

struct PayoffPair {
  double v0 = 0.0;
  double v1 = 0.0;
};
using ContinuationState = PayoffPair;

// Feasible region: v1 - v0 >= spread_floor, v1 + (kappa2-1) v0 <= z2, v1 - (kappa1+1) v0 <= z3.
struct Geometry {
  double kappa1 = 0.0, kappa2 = 0.0;
  double eps0 = 0.0, eps1 = 0.0;
  double z2 = 0.0, z3 = 0.0;
  double z3_min = 0.0;  // smallest z3 keeping the target inside
  PayoffPair target, left, top;  // vertices: target = floor/z2, left = floor/z3, top = z2/z3
  std::array<double, 2> v0_range{}, v1_range{};
  double benefit = 0.0, cost = 0.0;

  double spread_floor() const { return eps0 - eps1; }
  bool nonempty() const { return v0_range[0] <= v0_range[1] + 1e-12; }
};

enum class Z3Source { Lifted, Literal, AlternateForm };

// z3_slack only applies to Lifted: z3 = z3_min + z3_slack * xi.
Geometry build_geometry(const GameParams& params, double xi, Z3Source src = Z3Source::Lifted, double z3_slack = 1.0);

double kappa1(const GameParams& p);
double kappa2(const GameParams& p);

// Region test for s; at s1 = 0 only v0 counts, at s1 = N only v1.
bool membership(const PayoffPair& v, const RatingDistribution& s, const Geometry& geo, double tol = 0.0);
// Inside every W(s) at once (the region itself).
bool membership_all(const PayoffPair& v, const Geometry& geo, double tol = 0.0);
// Signed distance-like violation, 0 if inside.
double membership_violation(const PayoffPair& v, const Geometry& geo);

// Solve the 2x2 continuation system for a mixed distribution or the single equation for a uniform one.
// spread is only used when s is uniform: continuation has v1' - v0' = spread.
PayoffPair decompose(const PayoffPair& v, const RatingDistribution& s, const Plan& plan, const RatingUpdateRule& rule,
                     const GameParams& params, double spread = 0.0);

// Left-hand side of the promise-keeping equations given a continuation; used for round trips.
PayoffPair recompose(const PayoffPair& cont, const RatingDistribution& s, const Plan& plan, const RatingUpdateRule& rule,
                     const GameParams& params);

inline constexpr double kNoConstraintMargin = 1e300;

// Rating-theta detection strength (1-2eps)(beta_up - (1 - beta_down)).
double detection_strength(int theta, const RatingUpdateRule& rule, double eps);

double ic_margin(const Plan& plan, const RatingDistribution& s, const PayoffPair& gamma, const RatingUpdateRule& rule,
                 const GameParams& params);

// Enumerates all 16 deviations; returns max gain (negative means compliance is strictly better).
double ic_bruteforce_gain(const Plan& plan, const RatingDistribution& s, const PayoffPair& gamma,
                          const RatingUpdateRule& rule, const GameParams& params);

struct DeltaBound {
  double ic = 0.0;
  double fair = 0.0;
  double uniform = 0.0;
  double bound = 0.0;
  bool feasible = false;  // bound < 1
};

DeltaBound delta_lower_bound(const RatingUpdateRule& rule, const GameParams& params, double xi,
                             Z3Source src = Z3Source::Lifted, double z3_slack = 1.0);

double whitewash_benefit(const Geometry& geo, double xi);
bool is_whitewash_proof(double cost, const Geometry& geo, double xi);

}  // namespace rf
