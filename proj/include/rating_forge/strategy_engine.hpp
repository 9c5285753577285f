#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rating_forge/mechanism_design.hpp"
#include "rating_forge/simulator.hpp"

namespace rf {

struct EngineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EngineState {
  PayoffPair cont;
  long period = 0;
  std::optional<Plan> last_plan;
};

struct EngineOptions {
  double tol = 1e-7;  // membership slack before a hard failure
};

class StrategyEngine {
 public:
  StrategyEngine(const GameParams& params, const RatingUpdateRule& rule, const Geometry& geo, EngineOptions opt = {});

  static EngineState init(const Geometry& geo) { return {geo.target, 0, std::nullopt}; }

  // Plan choice for payoff v at s; no membership check.
  Plan select(const PayoffPair& v, const RatingDistribution& s) const;
  // Continuation for v at s under plan.
  PayoffPair continuation(const PayoffPair& v, const RatingDistribution& s, const Plan& plan) const;
  // Spread used when everyone shares a rating.
  double uniform_spread(int theta, const Plan& plan) const;

  Plan recommend(const EngineState& st, const RatingDistribution& s) const;
  EngineState advance(const EngineState& st, const RatingDistribution& s, const Plan& plan) const;

  const Geometry& geometry() const { return geo_; }
  const GameParams& params() const { return params_; }
  const RatingUpdateRule& rule() const { return rule_; }

 private:
  GameParams params_;
  RatingUpdateRule rule_;
  Geometry geo_;
  EngineOptions opt_;
  double x0_, x1_;
};

class EnginePolicy : public PlanPolicy {
 public:
  explicit EnginePolicy(const StrategyEngine& engine)
      : engine_(engine), state_(StrategyEngine::init(engine.geometry())) {}
  Plan recommend(const RatingDistribution& s) override { return engine_.recommend(state_, s); }
  void advance(const RatingDistribution& s, const Plan& plan) override { state_ = engine_.advance(state_, s, plan); }
  std::unique_ptr<PlanPolicy> clone() const override { return std::make_unique<EnginePolicy>(*this); }
  std::optional<std::pair<double, double>> continuation() const override {
    return std::make_pair(state_.cont.v0, state_.cont.v1);
  }
  const EngineState& state() const { return state_; }

 private:
  StrategyEngine engine_;
  EngineState state_;
};

struct CertificateReport {
  long points = 0;
  long failures = 0;
  long membership_failures = 0;
  long ic_failures = 0;
  double worst_violation = 0.0;
  double worst_ic = 0.0;
  std::vector<long> failures_by_s1;
  std::string first_failure;
  bool passed() const { return points > 0 && failures == 0; }
  double pass_fraction() const { return points ? 1.0 - double(failures) / double(points) : 0.0; }
};

// Decomposes a grid x grid raster of every W(s) (grid points on the segments when s is uniform).
CertificateReport certify(const GameParams& params, const RatingUpdateRule& rule, const Geometry& geo, int grid = 50,
                          double ic_tol = 1e-9, double member_tol = 1e-9, int threads = 0);

struct CertifiedDelta {
  DeltaBound analytic;
  bool found = false;
  double delta = 1.0;
  CertificateReport at_delta;   // report at `delta` when found
  CertificateReport at_bound;   // report at the analytic bound (or start) for comparison
  std::vector<std::pair<double, double>> scan;  // (delta, pass fraction)
};

// Scans upward from max(analytic bound, floor) toward 1, then bisects onto the first certified value.
CertifiedDelta certified_delta(const GameParams& params_sans_delta, const RatingUpdateRule& rule, double xi,
                               Z3Source src = Z3Source::Lifted, double z3_slack = 1.0, int grid = 50,
                               double floor = 0.5, int threads = 0);

struct RobustnessEntry {
  double assumed_eps = 0.0;
  bool infeasible = false;
  std::string reason;
  Summary welfare;
  double delta_pct = 0.0;  // welfare change vs the matched design, percent of b - c
  double delta_se_pct = 0.0;
  int failures = 0;
};

// Engine built for each assumed error, simulated under the true error in `base`.
std::vector<RobustnessEntry> run_robustness(const SimConfig& base, double xi, const std::vector<double>& assumed_eps,
                                            int seeds, int threads = 0, Z3Source src = Z3Source::Lifted,
                                            double z3_slack = 1.0);

}  // namespace rf
