#include "rating_forge/stationary_baseline.hpp"

#include <tbb/blocked_range.h>
#include <tbb/global_control.h>
#include <tbb/parallel_for.h>

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>

namespace rf {

PlanSubset parse_subset(const std::string& s) {
  if (s == "afs") return PlanSubset::AFS;
  if (s == "af") return PlanSubset::AF;
  if (s == "as") return PlanSubset::AS;
  if (s == "fs") return PlanSubset::FS;
  throw ValidationError("unknown plan subset '" + s + "' (afs, af, as, fs)");
}

std::string subset_name(PlanSubset s) {
  switch (s) {
    case PlanSubset::AFS: return "afs";
    case PlanSubset::AF: return "af";
    case PlanSubset::AS: return "as";
    case PlanSubset::FS: return "fs";
  }
  return "?";
}

std::vector<Plan> subset_plans(PlanSubset s) {
  switch (s) {
    case PlanSubset::AFS: return {plans::ALTRUISTIC, plans::FAIR, plans::SELFISH};
    case PlanSubset::AF: return {plans::ALTRUISTIC, plans::FAIR};
    case PlanSubset::AS: return {plans::ALTRUISTIC, plans::SELFISH};
    case PlanSubset::FS: return {plans::FAIR, plans::SELFISH};
  }
  return {};
}

int plan_slot(const Plan& p) {
  if (p == plans::ALTRUISTIC) return 0;
  if (p == plans::FAIR) return 1;
  if (p == plans::SELFISH) return 2;
  throw ValidationError("stationary strategies use altruistic, fair or selfish plans only");
}

Plan slot_plan(int slot) {
  static const Plan table[3] = {plans::ALTRUISTIC, plans::FAIR, plans::SELFISH};
  return table[slot];
}

std::string StationaryStrategy::encode() const {
  std::string out;
  for (const auto& p : plan_of) out.push_back(char('0' + plan_slot(p)));
  return out;
}

StationaryStrategy StationaryStrategy::decode(const std::string& code) {
  StationaryStrategy s;
  for (char ch : code) {
    if (ch < '0' || ch > '2') throw ValidationError("strategy code digits must be 0,1,2");
    s.plan_of.push_back(slot_plan(ch - '0'));
  }
  return s;
}

StationaryModel::StationaryModel(const GameParams& params, const RatingUpdateRule& rule, KernelMode mode)
    : params_(params), rule_(rule), mode_(mode), n_(params.n_users) {
  params_.validate();
  rule_.validate();
  cells_.resize(3 * 2 * (n_ + 1));
  for (int slot = 0; slot < 3; ++slot) {
    const Plan p = slot_plan(slot);
    for (int theta = 0; theta < 2; ++theta)
      for (int s1 = 0; s1 <= n_; ++s1) {
        RatingDistribution s{n_ - s1, s1};
        if (s.count(theta) == 0) continue;
        Cell& c = cells_[(slot * 2 + theta) * (n_ + 1) + s1];
        c.p_client1 = partner_rating1_prob(theta, s);
        c.stage = stage_payoff(theta, s, p, p, params_);
        for (int ct = 0; ct < 2; ++ct) {
          const double w = ct ? c.p_client1 : 1.0 - c.p_client1;
          if (w <= 0.0) {
            c.others[ct].assign(n_, 0.0);
            continue;
          }
          c.others[ct] = others_transition(s, theta, ct, p, rule_, params_.report_error, mode_);
        }
      }
  }
}

namespace {

// E[V_{theta'}(k + theta')] under the others' law, for theta' in {0,1}
inline void expected_next(const std::vector<double>& law, const ValueFunction& vf, double out[2]) {
  double e0 = 0.0, e1 = 0.0;
  const size_t n = law.size();
  for (size_t k = 0; k < n; ++k) {
    e0 += law[k] * vf.v[0][k];
    e1 += law[k] * vf.v[1][k + 1];
  }
  out[0] = e0;
  out[1] = e1;
}

}  // namespace

ValueFunction StationaryModel::solve(const StationaryStrategy& strategy) const {
  if (int(strategy.plan_of.size()) != n_ + 1) throw ValidationError("strategy must assign a plan to every s1");
  const int dim = 2 * (n_ + 1);
  const double d = params_.discount, eps = params_.report_error;
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(dim, dim);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
  auto idx = [&](int theta, int s1) { return theta * (n_ + 1) + s1; };
  for (int s1 = 0; s1 <= n_; ++s1) {
    const int slot = plan_slot(strategy.plan_of[s1]);
    const Plan p = strategy.plan_of[s1];
    for (int theta = 0; theta < 2; ++theta) {
      const int row = idx(theta, s1);
      if ((theta ? s1 : n_ - s1) == 0) {
        A(row, idx(1 - theta, s1)) -= 1.0;
        continue;
      }
      const Cell& c = cell(slot, theta, s1);
      rhs(row) = (1.0 - d) * c.stage;
      for (int ct = 0; ct < 2; ++ct) {
        const double w = ct ? c.p_client1 : 1.0 - c.p_client1;
        if (w <= 0.0) continue;
        const double up = service_up_probability(theta, ct, p, p, rule_, eps);
        const auto& law = c.others[ct];
        for (int k = 0; k < n_; ++k) {
          if (law[k] == 0.0) continue;
          A(row, idx(0, k)) -= d * w * (1.0 - up) * law[k];
          A(row, idx(1, k + 1)) -= d * w * up * law[k];
        }
      }
    }
  }
  Eigen::VectorXd x = A.partialPivLu().solve(rhs);
  ValueFunction vf;
  vf.v[0].resize(n_ + 1);
  vf.v[1].resize(n_ + 1);
  for (int s1 = 0; s1 <= n_; ++s1) {
    vf.v[0][s1] = x(idx(0, s1));
    vf.v[1][s1] = x(idx(1, s1));
  }
  return vf;
}

double StationaryModel::deviation_value(int slot, int theta, int s1, const Plan& dev, const ValueFunction& vf) const {
  const Cell& c = cell(slot, theta, s1);
  const Plan rec = slot_plan(slot);
  const RatingDistribution s{n_ - s1, s1};
  const double d = params_.discount, eps = params_.report_error;
  double cont = 0.0;
  for (int ct = 0; ct < 2; ++ct) {
    const double w = ct ? c.p_client1 : 1.0 - c.p_client1;
    if (w <= 0.0) continue;
    double e[2];
    expected_next(c.others[ct], vf, e);
    const double up = service_up_probability(theta, ct, rec, dev, rule_, eps);
    cont += w * (up * e[1] + (1.0 - up) * e[0]);
  }
  return (1.0 - d) * stage_payoff(theta, s, rec, dev, params_) + d * cont;
}

double StationaryModel::residual(const StationaryStrategy& strategy, const ValueFunction& vf) const {
  double worst = 0.0;
  for (int s1 = 0; s1 <= n_; ++s1)
    for (int theta = 0; theta < 2; ++theta) {
      if ((theta ? s1 : n_ - s1) == 0) continue;
      const double rhs = deviation_value(plan_slot(strategy.plan_of[s1]), theta, s1, strategy.plan_of[s1], vf);
      worst = std::max(worst, std::abs(vf.v[theta][s1] - rhs));
    }
  return worst;
}

double StationaryModel::ic_slack(const StationaryStrategy& strategy, const ValueFunction& vf, bool all_sixteen) const {
  double worst = std::numeric_limits<double>::infinity();
  for (int s1 = 0; s1 <= n_; ++s1) {
    const int slot = plan_slot(strategy.plan_of[s1]);
    for (int theta = 0; theta < 2; ++theta) {
      if ((theta ? s1 : n_ - s1) == 0) continue;
      const double base = vf.v[theta][s1];
      for (int id = 0; id < 16; ++id) {
        const Plan dev = Plan::from_id(id);
        // only the row for the user's own rating changes its behaviour
        if (!all_sixteen && dev.quality(0, 1 - theta) != 0) continue;
        if (!all_sixteen && dev.quality(1, 1 - theta) != 0) continue;
        worst = std::min(worst, base - deviation_value(slot, theta, s1, dev, vf));
      }
    }
  }
  return worst;
}

double StationaryModel::worst_case_welfare(const ValueFunction& vf) const {
  double worst = std::numeric_limits<double>::infinity();
  for (int s1 = 0; s1 <= n_; ++s1) {
    const double w = (double(n_ - s1) * vf.v[0][s1] + double(s1) * vf.v[1][s1]) / double(n_);
    worst = std::min(worst, w);
  }
  return worst;
}

ValueFunction solve_value_function(const StationaryStrategy& strategy, const RatingUpdateRule& rule,
                                   const GameParams& params, KernelMode mode) {
  return StationaryModel(params, rule, mode).solve(strategy);
}

IcReport check_ic(const StationaryStrategy& strategy, const RatingUpdateRule& rule, const GameParams& params,
                  const ValueFunction& vf, KernelMode mode) {
  StationaryModel m(params, rule, mode);
  const double slack = m.ic_slack(strategy, vf, true);
  return {slack >= -1e-10, slack};
}

std::vector<StationaryStrategy> enumerate_strategies(int n, PlanSubset subset, StrategySpace space) {
  const auto allowed = subset_plans(subset);
  std::vector<StationaryStrategy> out;
  if (space == StrategySpace::Full) {
    const int k = int(allowed.size());
    long total = 1;
    for (int i = 0; i <= n; ++i) total *= k;
    for (long code = 0; code < total; ++code) {
      StationaryStrategy s;
      long c = code;
      for (int i = 0; i <= n; ++i) {
        s.plan_of.push_back(allowed[c % k]);
        c /= k;
      }
      out.push_back(std::move(s));
    }
    return out;
  }
  // threshold: plan_lo below k, plan_hi at or above k
  for (const auto& lo : allowed)
    for (const auto& hi : allowed)
      for (int k = 0; k <= n + 1; ++k) {
        if (lo == hi && k > 0) continue;
        StationaryStrategy s;
        for (int s1 = 0; s1 <= n; ++s1) s.plan_of.push_back(s1 >= k ? hi : lo);
        out.push_back(std::move(s));
      }
  return out;
}

namespace {

struct RuleOutcome {
  bool found = false;
  double welfare = -std::numeric_limits<double>::infinity();
  int strategy = -1;
  double best_positive = 0.0;
};

RuleOutcome evaluate_rule(const StationaryModel& m, const std::vector<StationaryStrategy>& strategies) {
  RuleOutcome out;
  for (size_t i = 0; i < strategies.size(); ++i) {
    const ValueFunction vf = m.solve(strategies[i]);
    const double w = m.worst_case_welfare(vf);
    if (w <= out.welfare + 1e-12) continue;
    if (m.ic_slack(strategies[i], vf) < -1e-10) continue;
    out.found = true;
    out.welfare = w;
    out.strategy = int(i);
  }
  return out;
}

}  // namespace

SearchResult search(const GameParams& params, const SearchOptions& opt) {
  params.validate();
  if (opt.space == StrategySpace::Full && params.n_users > 6)
    throw ValidationError("full strategy space limited to N <= 6; use the threshold space");
  const int steps = int(std::lround(1.0 / opt.grid_step));
  if (steps < 1 || std::abs(steps * opt.grid_step - 1.0) > 1e-9) throw ValidationError("grid step must divide 1");
  const int g = steps + 1;
  const long n_rules = long(g) * g * g * g;
  const auto strategies = enumerate_strategies(params.n_users, opt.subset, opt.space);

  std::vector<RuleOutcome> outcomes(n_rules);
  auto rule_of = [&](long r) {
    const int i1 = int(r / (long(g) * g * g)), i2 = int(r / (long(g) * g) % g), i3 = int(r / g % g), i4 = int(r % g);
    return RatingUpdateRule::make(i1 * opt.grid_step, i2 * opt.grid_step, i3 * opt.grid_step, i4 * opt.grid_step);
  };
  std::atomic<long> done{0};
  std::mutex progress_mu;
  auto body = [&](const tbb::blocked_range<long>& range) {
    for (long r = range.begin(); r != range.end(); ++r) {
      StationaryModel m(params, rule_of(r), opt.mode);
      outcomes[r] = evaluate_rule(m, strategies);
      const long k = ++done;
      if (opt.progress && k % 512 == 0) {
        std::lock_guard<std::mutex> lock(progress_mu);
        opt.progress(double(k) / double(n_rules), outcomes[r].welfare);
      }
    }
  };
  const int threads = opt.threads > 0 ? opt.threads : int(tbb::info::default_concurrency());
  tbb::global_control gc(tbb::global_control::max_allowed_parallelism, std::max(1, threads));
  tbb::parallel_for(tbb::blocked_range<long>(0, n_rules, 16), body);

  SearchResult res;
  res.evaluated = n_rules * long(strategies.size());
  for (long r = 0; r < n_rules; ++r) {
    const auto& o = outcomes[r];
    if (!o.found) continue;
    if (!res.found || o.welfare > res.welfare + opt.welfare_tol) {
      res.found = true;
      res.welfare = o.welfare;
      res.rule = rule_of(r);
      res.strategy = strategies[o.strategy];
    }
  }
  for (long r = 0; r < n_rules; ++r) {
    const auto& o = outcomes[r];
    if (!o.found || o.welfare <= 1e-9) continue;
    const double b1d = rule_of(r).beta_down[1];
    res.min_beta1_down_positive = std::min(res.min_beta1_down_positive, b1d);
    if (o.welfare >= res.welfare - opt.welfare_tol) res.min_beta1_down_optimal = std::min(res.min_beta1_down_optimal, b1d);
  }
  if (!res.found) {
    res.welfare = 0.0;
    res.strategy.plan_of.assign(params.n_users + 1, plans::SELFISH);
  }
  res.normalized = res.welfare / (params.benefit - params.cost);
  return res;
}

PostatResult postat(const GameParams& params_sans_delta, const std::vector<double>& delta_schedule,
                    const SearchOptions& opt) {
  if (delta_schedule.empty()) throw ValidationError("empty discount schedule");
  for (size_t i = 1; i < delta_schedule.size(); ++i)
    if (!(delta_schedule[i] > delta_schedule[i - 1])) throw ValidationError("discount schedule must increase");
  PostatResult out;
  for (double d : delta_schedule) {
    GameParams p = params_sans_delta;
    p.discount = d;
    out.per_delta.emplace_back(d, search(p, opt));
  }
  const size_t k = out.per_delta.size();
  out.ratio = out.per_delta.back().second.normalized;
  out.plateau = k >= 2 && std::abs(out.per_delta[k - 1].second.normalized - out.per_delta[k - 2].second.normalized) < 1e-3;
  return out;
}

}  // namespace rf
