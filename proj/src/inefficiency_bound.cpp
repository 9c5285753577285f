#include "rating_forge/inefficiency_bound.hpp"

#include <tbb/global_control.h>
#include <tbb/parallel_for.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace rf {

namespace {

constexpr std::array<Plan, 3> kShirks{plans::DEV0, plans::DEV1, plans::DEV01};

// Per (s, recommended plan): law of next s1 under full service and the gaps for each shirk.
struct Table {
  std::vector<double> comply;
  struct Row {
    double skipped;             // probability of meeting a client the shirk skips
    std::vector<double> delta;  // comply - deviate, per next s1
  };
  std::vector<Row> rows;
};

Table build_table(const RatingDistribution& s, const Plan& recommended, const RatingUpdateRule& rule,
                  const GameParams& params) {
  const double eps = params.report_error;
  const Plan& played = plans::ALTRUISTIC;
  Table t;
  const int any = s.s1 > 0 ? 1 : 0;
  t.comply = played_distribution_transition(s, any, recommended, played, played, rule, eps, KernelMode::Exact);
  for (int theta = 0; theta < 2; ++theta) {
    if (s.count(theta) == 0) continue;
    const double p1 = partner_rating1_prob(theta, s);
    for (const Plan& dev : kShirks) {
      double skipped = 0.0;
      for (int ct = 0; ct < 2; ++ct)
        if (played.quality(ct, theta) && !dev.quality(ct, theta)) skipped += ct ? p1 : 1.0 - p1;
      if (skipped <= 0.0) continue;  // behaves exactly like compliance here
      auto q = played_distribution_transition(s, theta, recommended, played, dev, rule, eps, KernelMode::Exact);
      Table::Row r{skipped, std::vector<double>(q.size())};
      for (size_t k = 0; k < q.size(); ++k) r.delta[k] = t.comply[k] - q[k];
      t.rows.push_back(std::move(r));
    }
  }
  return t;
}

RhoResult rho_from_table(const Table& t, std::uint32_t mask) {
  RhoResult out;
  out.min_gap = std::numeric_limits<double>::infinity();
  for (const auto& r : t.rows) {
    double gap = 0.0;
    for (size_t k = 0; k < r.delta.size(); ++k)
      if (!(mask >> k & 1u)) gap += r.delta[k];
    out.min_gap = std::min(out.min_gap, gap);
    if (!(gap > 1e-14)) {
      out.violated = true;
      continue;
    }
    out.value = std::max(out.value, r.skipped / gap);
  }
  if (t.rows.empty()) out.violated = true;
  return out;
}

void check_size(const GameParams& params) {
  params.validate();
  if (params.n_users > kExactMatchingLimit)
    throw ValidationError("bound needs exact kernels; n_users must be at most " +
                          std::to_string(kExactMatchingLimit));
}

std::vector<Plan> candidate_plans(bool all) {
  if (!all) return {plans::ALTRUISTIC, plans::SELFISH};
  std::vector<Plan> out;
  for (int id = 0; id < 16; ++id) out.push_back(Plan::from_id(id));
  return out;
}

}  // namespace

RhoResult rho(const RatingDistribution& s, const Plan& recommended, std::uint32_t punished_mask,
              const RatingUpdateRule& rule, const GameParams& params) {
  check_size(params);
  if (s.n() != params.n_users) throw ValidationError("distribution does not match n_users");
  if (punished_mask == 0) throw ValidationError("punished subset must be nonempty");
  return rho_from_table(build_table(s, recommended, rule, params), punished_mask);
}

BoundResult zeta(const GameParams& params, const RatingUpdateRule& rule, const BoundOptions& opt) {
  check_size(params);
  rule.validate();
  const int n = params.n_users;
  const std::uint32_t full = (1u << (n + 1)) - 1u;
  BoundResult best;
  double best_val = std::numeric_limits<double>::infinity();
  for (const Plan& rec : candidate_plans(opt.all_plans)) {
    for (int s1 = 0; s1 <= n; ++s1) {
      const RatingDistribution s{n - s1, s1};
      const Table t = build_table(s, rec, rule, params);
      for (std::uint32_t i = 1; i < full; ++i) {
        const std::uint32_t mask = opt.reverse_order ? full - i : i;
        ++best.subsets_checked;
        const RhoResult r = rho_from_table(t, mask);
        if (r.violated) continue;
        ++best.subsets_feasible;
        double mass = 0.0;
        for (int k = 0; k <= n; ++k)
          if (mask >> k & 1u) mass += t.comply[k];
        const double val = r.value * mass;
        if (val < best_val) {
          best_val = val;
          best.found = true;
          best.argmin_plan = rec;
          best.argmin_s1 = s1;
          best.argmin_mask = mask;
          best.rho = r.value;
          best.punished_mass = mass;
        }
      }
    }
  }
  const double bc = params.benefit - params.cost;
  best.zeta = best.found ? params.cost * best_val : 0.0;
  best.normalized_bound = (bc - best.zeta) / bc;
  return best;
}

BoundResult zeta_over_rules(const GameParams& params, double grid_step, const BoundOptions& opt,
                            RatingUpdateRule* argmin_rule) {
  check_size(params);
  const int steps = int(std::lround(1.0 / grid_step));
  if (steps < 1 || std::abs(steps * grid_step - 1.0) > 1e-9) throw ValidationError("grid step must divide 1");
  const int per = steps + 1;
  const long total = long(per) * per * per * per;
  std::vector<BoundResult> res(total);
  auto rule_at = [&](long k) {
    const int a = int(k / (per * per * per)), b = int(k / (per * per) % per), c = int(k / per % per), d = int(k % per);
    return RatingUpdateRule::make(a * grid_step, b * grid_step, c * grid_step, d * grid_step);
  };
  const int t = opt.threads > 0 ? opt.threads : int(tbb::info::default_concurrency());
  tbb::global_control gc(tbb::global_control::max_allowed_parallelism, t);
  BoundOptions inner = opt;
  tbb::parallel_for(long(0), total, [&](long k) { res[k] = zeta(params, rule_at(k), inner); });
  BoundResult best;
  long arg = -1;
  for (long k = 0; k < total; ++k) {
    best.subsets_checked += res[k].subsets_checked;
    best.subsets_feasible += res[k].subsets_feasible;
    if (res[k].found && (arg < 0 || res[k].zeta < res[arg].zeta)) arg = k;
  }
  if (arg >= 0) {
    const long checked = best.subsets_checked, feasible = best.subsets_feasible;
    best = res[arg];
    best.subsets_checked = checked;
    best.subsets_feasible = feasible;
    if (argmin_rule) *argmin_rule = rule_at(arg);
  } else {
    best.normalized_bound = 1.0;
  }
  return best;
}

}  // namespace rf
