#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rating_forge/core_model.hpp"

namespace rf {

enum class PlanSubset { AFS, AF, AS, FS };

PlanSubset parse_subset(const std::string& s);
std::string subset_name(PlanSubset s);
std::vector<Plan> subset_plans(PlanSubset s);

struct StationaryStrategy {
  std::vector<Plan> plan_of;  // indexed by s1 = 0..N

  // base-3 digit per s1: 0 altruistic, 1 fair, 2 selfish
  std::string encode() const;
  static StationaryStrategy decode(const std::string& code);
};

struct ValueFunction {
  // v[theta][s1]; entries with no rating-theta user are pinned to the other rating's value
  std::vector<double> v[2];
  double at(int theta, int s1) const { return v[theta][s1]; }
};

// Per-rule transition tables for the three stationary plans, reused across strategies.
class StationaryModel {
 public:
  StationaryModel(const GameParams& params, const RatingUpdateRule& rule, KernelMode mode);

  const GameParams& params() const { return params_; }
  const RatingUpdateRule& rule() const { return rule_; }

  ValueFunction solve(const StationaryStrategy& strategy) const;
  // residual max |V - (1-d)u - d PV|
  double residual(const StationaryStrategy& strategy, const ValueFunction& vf) const;
  // Worst one-shot deviation slack over states, present ratings and all 16 plans.
  double ic_slack(const StationaryStrategy& strategy, const ValueFunction& vf, bool all_sixteen = false) const;
  double worst_case_welfare(const ValueFunction& vf) const;

  struct Cell {
    double p_client1 = 0;             // probability the focal user's client has rating 1
    std::vector<double> others[2];    // law of others' next rating-1 count given client rating
    double stage = 0;                 // compliant stage payoff
  };
  // index: plan slot (0 a, 1 f, 2 s), theta, s1
  const Cell& cell(int slot, int theta, int s1) const { return cells_[(slot * 2 + theta) * (n_ + 1) + s1]; }

 private:
  double deviation_value(int slot, int theta, int s1, const Plan& dev, const ValueFunction& vf) const;

  GameParams params_;
  RatingUpdateRule rule_;
  KernelMode mode_;
  int n_;
  std::vector<Cell> cells_;
};

int plan_slot(const Plan& p);
Plan slot_plan(int slot);

ValueFunction solve_value_function(const StationaryStrategy& strategy, const RatingUpdateRule& rule,
                                   const GameParams& params, KernelMode mode = KernelMode::Exact);

struct IcReport {
  bool ok;
  double worst_margin;
};
IcReport check_ic(const StationaryStrategy& strategy, const RatingUpdateRule& rule, const GameParams& params,
                  const ValueFunction& vf, KernelMode mode = KernelMode::Exact);

enum class StrategySpace { Full, Threshold };

struct SearchOptions {
  PlanSubset subset = PlanSubset::AFS;
  double grid_step = 0.1;
  StrategySpace space = StrategySpace::Full;
  KernelMode mode = KernelMode::Exact;
  int threads = 0;
  double welfare_tol = 1e-9;
  std::function<void(double fraction, double best)> progress;
};

struct SearchResult {
  bool found = false;
  double welfare = 0.0;
  double normalized = 0.0;
  RatingUpdateRule rule;
  StationaryStrategy strategy;
  // smallest beta_1^- among rules whose best strategy is IC and welfare > 0 and within tol of the optimum
  double min_beta1_down_optimal = 1.0;
  // smallest beta_1^- among rules admitting an IC strategy with positive welfare
  double min_beta1_down_positive = 1.0;
  long evaluated = 0;
};

std::vector<StationaryStrategy> enumerate_strategies(int n, PlanSubset subset, StrategySpace space);

SearchResult search(const GameParams& params, const SearchOptions& opt);

struct PostatResult {
  double ratio = 0.0;
  bool plateau = false;
  std::vector<std::pair<double, SearchResult>> per_delta;
};

PostatResult postat(const GameParams& params_sans_delta, const std::vector<double>& delta_schedule,
                    const SearchOptions& opt);

}  // namespace rf
