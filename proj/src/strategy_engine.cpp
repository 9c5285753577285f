#include "rating_forge/strategy_engine.hpp"

#include <tbb/global_control.h>
#include <tbb/parallel_for.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>

namespace rf {

StrategyEngine::StrategyEngine(const GameParams& params, const RatingUpdateRule& rule, const Geometry& geo,
                               EngineOptions opt)
    : params_(params), rule_(rule), geo_(geo), opt_(opt) {
  params_.validate();
  rule_.validate();
  if (!geo_.nonempty()) throw InfeasibleError("payoff region is empty for this geometry");
  x0_ = x0_plus(rule_, params_.report_error);
  x1_ = x1_plus(rule_, params_.report_error);
  if (!(x1_ > x0_)) throw InfeasibleError("rule gives x1+ <= x0+; mixed states cannot be split");
}

double StrategyEngine::uniform_spread(int theta, const Plan& plan) const {
  const double d = geo_.spread_floor();
  if (plan == plans::SELFISH) return d;
  const double k = detection_strength(theta, rule_, params_.report_error);
  if (k <= 0.0) throw InfeasibleError("rule cannot detect shirking at rating " + std::to_string(theta));
  const double delta = params_.discount;
  return std::max(d, (1.0 - delta) / delta * params_.cost / k);
}

PayoffPair StrategyEngine::continuation(const PayoffPair& v, const RatingDistribution& s, const Plan& plan) const {
  if (s.s0 == 0 || s.s1 == 0) {
    const int theta = s.s1 > 0 ? 1 : 0;
    return decompose(v, s, plan, rule_, params_, uniform_spread(theta, plan));
  }
  return decompose(v, s, plan, rule_, params_);
}

Plan StrategyEngine::select(const PayoffPair& v, const RatingDistribution& s) const {
  if (s.s0 == 0 || s.s1 == 0) {
    // altruistic if its continuation stays inside, selfish otherwise
    const PayoffPair g = continuation(v, s, plans::ALTRUISTIC);
    return membership_all(g, geo_, 1e-12) ? plans::ALTRUISTIC : plans::SELFISH;
  }
  const double delta = params_.discount, k1 = geo_.kappa1, bc = params_.benefit - params_.cost;
  const double lhs = ((1.0 + k1 * x0_) * v.v1 - (1.0 + k1 * x1_) * v.v0) / (x1_ - x0_);
  return lhs <= delta * geo_.z3 - (1.0 - delta) * k1 * bc ? plans::ALTRUISTIC : plans::FAIR;
}

Plan StrategyEngine::recommend(const EngineState& st, const RatingDistribution& s) const {
  if (!membership(st.cont, s, geo_, opt_.tol)) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "continuation (%.9g, %.9g) left the payoff region at s1=%d", st.cont.v0,
                  st.cont.v1, s.s1);
    throw EngineError(buf);
  }
  return select(st.cont, s);
}

namespace {
// pull a point that is within tolerance back onto the region
PayoffPair project(PayoffPair v, const Geometry& g) {
  for (int it = 0; it < 8 && membership_violation(v, g) > 0.0; ++it) {
    const double d = g.spread_floor();
    if (v.v1 - v.v0 < d) {
      const double m = 0.5 * (d - (v.v1 - v.v0));
      v.v0 -= m;
      v.v1 += m;
    }
    double e = v.v1 + (g.kappa2 - 1.0) * v.v0 - g.z2;
    if (e > 0.0) {
      const double nn = 1.0 + (g.kappa2 - 1.0) * (g.kappa2 - 1.0);
      v.v1 -= e / nn;
      v.v0 -= e * (g.kappa2 - 1.0) / nn;
    }
    e = v.v1 - (g.kappa1 + 1.0) * v.v0 - g.z3;
    if (e > 0.0) {
      const double nn = 1.0 + (g.kappa1 + 1.0) * (g.kappa1 + 1.0);
      v.v1 -= e / nn;
      v.v0 += e * (g.kappa1 + 1.0) / nn;
    }
  }
  return v;
}
}  // namespace

EngineState StrategyEngine::advance(const EngineState& st, const RatingDistribution& s, const Plan& plan) const {
  EngineState next = st;
  next.cont = continuation(st.cont, s, plan);
  const double viol = membership_violation(next.cont, geo_);
  if (viol > opt_.tol) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "continuation (%.9g, %.9g) after %s at s1=%d misses the region by %.3g",
                  next.cont.v0, next.cont.v1, plan.name().c_str(), s.s1, viol);
    throw EngineError(buf);
  }
  if (viol > 0.0) next.cont = project(next.cont, geo_);
  next.period = st.period + 1;
  next.last_plan = plan;
  return next;
}

CertificateReport certify(const GameParams& params, const RatingUpdateRule& rule, const Geometry& geo, int grid,
                          double ic_tol, double member_tol, int threads) {
  if (grid < 2) throw ValidationError("certificate grid needs at least 2 points per axis");
  const int n = params.n_users;
  CertificateReport rep;
  rep.failures_by_s1.assign(n + 1, 0);
  if (!geo.nonempty()) return rep;
  const StrategyEngine eng(params, rule, geo);

  struct Point {
    int s1;
    PayoffPair v;
  };
  std::vector<Point> pts;
  auto lin = [&](const std::array<double, 2>& r, int i) { return r[0] + (r[1] - r[0]) * double(i) / (grid - 1); };
  for (int s1 = 0; s1 <= n; ++s1) {
    const RatingDistribution s{n - s1, s1};
    if (s1 == 0 || s1 == n) {
      for (int i = 0; i < grid; ++i) {
        PayoffPair v;
        if (s1 == 0) v = {lin(geo.v0_range, i), lin(geo.v0_range, i) + geo.spread_floor()};
        else v = {lin(geo.v1_range, i) - geo.spread_floor(), lin(geo.v1_range, i)};
        pts.push_back({s1, v});
      }
      continue;
    }
    for (int i = 0; i < grid; ++i)
      for (int j = 0; j < grid; ++j) {
        PayoffPair v{lin(geo.v0_range, i), lin(geo.v1_range, j)};
        if (membership(v, s, geo)) pts.push_back({s1, v});
      }
  }

  std::mutex mu;
  auto body = [&](std::size_t k) {
    const Point& pt = pts[k];
    const RatingDistribution s{n - pt.s1, pt.s1};
    const Plan plan = eng.select(pt.v, s);
    const PayoffPair g = eng.continuation(pt.v, s, plan);
    const double viol = membership_violation(g, geo);
    const double ic = ic_margin(plan, s, g, rule, params);
    const bool bad_m = viol > member_tol, bad_ic = ic < -ic_tol;
    std::lock_guard<std::mutex> lk(mu);
    rep.worst_violation = std::max(rep.worst_violation, viol);
    if (ic < kNoConstraintMargin) rep.worst_ic = std::min(rep.worst_ic, ic);
    if (bad_m || bad_ic) {
      ++rep.failures;
      rep.membership_failures += bad_m;
      rep.ic_failures += bad_ic;
      ++rep.failures_by_s1[pt.s1];
      if (rep.first_failure.empty()) {
        char buf[200];
        std::snprintf(buf, sizeof buf, "s1=%d v=(%.6f, %.6f) plan=%s cont=(%.6f, %.6f) miss=%.3g ic=%.3g", pt.s1,
                      pt.v.v0, pt.v.v1, plan.name().c_str(), g.v0, g.v1, viol, ic);
        rep.first_failure = buf;
      }
    }
  };
  const int t = threads > 0 ? threads : int(tbb::info::default_concurrency());
  tbb::global_control gc(tbb::global_control::max_allowed_parallelism, t);
  tbb::parallel_for(std::size_t(0), pts.size(), body);
  rep.points = long(pts.size());
  return rep;
}

CertifiedDelta certified_delta(const GameParams& params_sans_delta, const RatingUpdateRule& rule, double xi,
                               Z3Source src, double z3_slack, int grid, double floor, int threads) {
  CertifiedDelta out;
  GameParams p = params_sans_delta;
  out.analytic = delta_lower_bound(rule, p, xi, src, z3_slack);
  const Geometry geo = build_geometry(p, xi, src, z3_slack);
  const double start = std::max(floor, out.analytic.feasible ? out.analytic.bound : floor);
  auto run = [&](double d) {
    p.discount = d;
    CertificateReport r = certify(p, rule, geo, grid, 1e-9, 1e-9, threads);
    out.scan.emplace_back(d, r.pass_fraction());
    return r;
  };
  out.at_bound = run(start);
  if (out.at_bound.passed()) {
    out.found = true;
    out.delta = start;
    out.at_delta = out.at_bound;
    return out;
  }
  // geometric approach to 1
  double lo = start, hi = -1.0;
  CertificateReport hit;
  for (int k = 1; k <= 16; ++k) {
    const double d = 1.0 - (1.0 - start) * std::pow(0.5, k);
    CertificateReport r = run(d);
    if (r.passed()) {
      hi = d;
      hit = r;
      break;
    }
    lo = d;
  }
  if (hi < 0.0) return out;
  for (int it = 0; it < 12 && hi - lo > 1e-5; ++it) {
    const double mid = 0.5 * (lo + hi);
    CertificateReport r = run(mid);
    if (r.passed()) {
      hi = mid;
      hit = r;
    } else {
      lo = mid;
    }
  }
  out.found = true;
  out.delta = hi;
  out.at_delta = hit;
  return out;
}

std::vector<RobustnessEntry> run_robustness(const SimConfig& base, double xi, const std::vector<double>& assumed_eps,
                                            int seeds, int threads, Z3Source src, double z3_slack) {
  const double bc = base.params.benefit - base.params.cost;
  auto simulate = [&](double eps_hat, RobustnessEntry& e) -> std::vector<double> {
    e.assumed_eps = eps_hat;
    try {
      GameParams assumed = base.params;
      assumed.report_error = eps_hat;
      assumed.validate();
      const Geometry geo = build_geometry(assumed, xi, src, z3_slack);
      const StrategyEngine eng(assumed, base.rule, geo);
      const MultiSeedResult r = run_seeds(base, EnginePolicy(eng), seeds, threads);
      e.welfare = r.payoff;
      e.failures = r.failures;
      return r.per_seed;
    } catch (const std::exception& ex) {
      e.infeasible = true;
      e.reason = ex.what();
      return {};
    }
  };
  RobustnessEntry matched;
  const std::vector<double> ref = simulate(base.params.report_error, matched);
  std::vector<RobustnessEntry> out;
  for (double eps_hat : assumed_eps) {
    RobustnessEntry e;
    const std::vector<double> w = simulate(eps_hat, e);
    if (!e.infeasible && !matched.infeasible) {
      // same seeds on both sides, so difference per seed
      std::vector<double> diff(w.size());
      for (size_t k = 0; k < w.size(); ++k) diff[k] = (w[k] - ref[k]) / bc * 100.0;
      const Summary d = summarize(diff);
      e.delta_pct = d.mean;
      e.delta_se_pct = d.se;
    } else if (matched.infeasible && !e.infeasible) {
      e.infeasible = true;
      e.reason = "matched design infeasible: " + matched.reason;
    }
    out.push_back(e);
  }
  return out;
}

}  // namespace rf
