#include "rating_forge/mechanism_design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rf {

namespace {
double others_ratio(const GameParams& p) { return p.cost / ((p.n_users - 1) * p.benefit); }
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

ConditionReport check_conditions(const RatingUpdateRule& rule, const GameParams& params) {
  params.validate();
  rule.validate();
  ConditionReport r;
  const double eps = params.report_error;
  r.ordering_slack = std::min(rule.beta_up[1] + rule.beta_down[1] - 1.0, rule.beta_up[0] + rule.beta_down[0] - 1.0);
  r.ordering = r.ordering_slack > 0.0;
  const double ratio = others_ratio(params);
  r.high_retention_slack = x1_plus(rule, eps) - 1.0 / (1.0 + ratio);
  r.high_retention = r.high_retention_slack > 0.0;
  r.low_promotion_slack = (1.0 - rule.beta_up[1]) / ratio - x0_plus(rule, eps);
  r.low_promotion = r.low_promotion_slack > 0.0;
  return r;
}

double kappa1(const GameParams& p) {
  const double n = p.n_users;
  const double den = (n - 2) / (n - 1) * p.benefit - p.cost;
  if (den <= 0.0) throw InfeasibleError("((N-2)/(N-1)) b - c must be positive");
  return p.benefit / den - 1.0;
}

double kappa2(const GameParams& p) { return 1.0 + others_ratio(p); }

Geometry build_geometry(const GameParams& params, double xi, Z3Source src, double z3_slack) {
  params.validate();
  if (!(xi > 0.0)) throw ValidationError("xi must be positive");
  Geometry g;
  g.benefit = params.benefit;
  g.cost = params.cost;
  g.kappa1 = kappa1(params);
  g.kappa2 = kappa2(params);
  if (g.kappa1 <= 0.0) throw InfeasibleError("kappa1 is not positive for these N, b, c");
  const double k1 = g.kappa1, k2 = g.kappa2, bc = params.benefit - params.cost;
  g.eps0 = xi;
  g.eps1 = g.eps0 / (1.0 + k2 / k1);
  g.target = {bc - g.eps0, bc - g.eps1};
  g.z3_min = g.target.v1 - (k1 + 1.0) * g.target.v0;
  switch (src) {
    case Z3Source::Literal:
      g.z2 = k2 * bc - (k2 - 1.0) * g.eps0 - g.eps1;
      g.z3 = -(k1 / k2) * g.z2;
      break;
    case Z3Source::Lifted:
      g.z2 = k2 * bc - (k2 - 1.0) * g.eps0 - g.eps1;
      g.z3 = g.z3_min + z3_slack * xi;
      break;
    case Z3Source::AlternateForm:
      g.z2 = -k1 * bc + k1 * (1.0 - 1.0 / k2) * xi + xi * (k1 / k2) / (1.0 + k2 / k1);
      g.z3 = g.z2 / (k1 + k2);
      break;
  }
  const double d = g.spread_floor();
  g.left.v0 = (d - g.z3) / k1;
  g.left.v1 = g.left.v0 + d;
  g.top.v0 = (g.z2 - g.z3) / (k1 + k2);
  g.top.v1 = g.z2 - (k2 - 1.0) * g.top.v0;
  // floor edge runs from left to target; empty if they cross over
  const double tv0 = (g.z2 - d) / k2;  // floor meets z2 edge
  if (g.left.v0 > tv0 + 1e-12) {
    g.v0_range = {1.0, 0.0};
    g.v1_range = {1.0, 0.0};
  } else {
    g.v0_range = {g.left.v0, tv0};
    g.v1_range = {std::min(g.left.v1, tv0 + d), std::max({g.left.v1, tv0 + d, g.top.v1})};
  }
  return g;
}

double membership_violation(const PayoffPair& v, const Geometry& geo) {
  const double a = geo.spread_floor() - (v.v1 - v.v0);
  const double b = v.v1 + (geo.kappa2 - 1.0) * v.v0 - geo.z2;
  const double c = v.v1 - (geo.kappa1 + 1.0) * v.v0 - geo.z3;
  return std::max({0.0, a, b, c});
}

bool membership_all(const PayoffPair& v, const Geometry& geo, double tol) {
  return geo.nonempty() && membership_violation(v, geo) <= tol;
}

bool membership(const PayoffPair& v, const RatingDistribution& s, const Geometry& geo, double tol) {
  if (!geo.nonempty()) return false;
  if (s.s1 == 0) return v.v0 >= geo.v0_range[0] - tol && v.v0 <= geo.v0_range[1] + tol;
  if (s.s0 == 0) return v.v1 >= geo.v1_range[0] - tol && v.v1 <= geo.v1_range[1] + tol;
  return membership_violation(v, geo) <= tol;
}

PayoffPair decompose(const PayoffPair& v, const RatingDistribution& s, const Plan& plan, const RatingUpdateRule& rule,
                     const GameParams& params, double spread) {
  if (!(plan == plans::ALTRUISTIC || plan == plans::FAIR || plan == plans::SELFISH))
    throw ValidationError("decompose supports altruistic, fair and selfish only");
  const double delta = params.discount, eps = params.report_error;
  if (delta <= 0.0) throw ValidationError("decompose needs a positive discount");
  if (s.n() != params.n_users) throw ValidationError("distribution does not match n_users");
  if (s.s0 == 0 || s.s1 == 0) {
    const int theta = s.s1 > 0 ? 1 : 0;
    const double u = stage_payoff(theta, s, plan, plan, params);
    const double p = compliance_up_probability(theta, plan, s, rule, eps);
    const double vt = theta ? v.v1 : v.v0;
    PayoffPair out;
    out.v0 = (vt - (1.0 - delta) * u) / delta - p * spread;
    out.v1 = out.v0 + spread;
    return out;
  }
  const double u0 = stage_payoff(0, s, plan, plan, params), u1 = stage_payoff(1, s, plan, plan, params);
  const double p0 = compliance_up_probability(0, plan, s, rule, eps);
  const double p1 = compliance_up_probability(1, plan, s, rule, eps);
  if (std::abs(p1 - p0) < 1e-12)
    throw InfeasibleError("degenerate rule: equal up-probabilities for both ratings under " + plan.name() + " (" +
                          rule.str() + ")");
  const double gap = (v.v1 - v.v0 - (1.0 - delta) * (u1 - u0)) / (delta * (p1 - p0));
  PayoffPair out;
  out.v0 = (v.v0 - (1.0 - delta) * u0) / delta - p0 * gap;
  out.v1 = out.v0 + gap;
  return out;
}

PayoffPair recompose(const PayoffPair& cont, const RatingDistribution& s, const Plan& plan,
                     const RatingUpdateRule& rule, const GameParams& params) {
  const double delta = params.discount, eps = params.report_error;
  PayoffPair out{std::nan(""), std::nan("")};
  for (int theta = 0; theta < 2; ++theta) {
    if (s.count(theta) == 0) continue;
    const double u = stage_payoff(theta, s, plan, plan, params);
    const double p = compliance_up_probability(theta, plan, s, rule, eps);
    const double val = (1.0 - delta) * u + delta * (p * cont.v1 + (1.0 - p) * cont.v0);
    (theta ? out.v1 : out.v0) = val;
  }
  return out;
}

double detection_strength(int theta, const RatingUpdateRule& rule, double eps) {
  return (1.0 - 2.0 * eps) * (rule.beta_up[theta] - (1.0 - rule.beta_down[theta]));
}

double ic_margin(const Plan& plan, const RatingDistribution& s, const PayoffPair& gamma, const RatingUpdateRule& rule,
                 const GameParams& params) {
  if (plan == plans::SELFISH) return kNoConstraintMargin;
  const double delta = params.discount;
  if (delta <= 0.0) return -kInf;
  const double need = (1.0 - delta) / delta * params.cost;
  double best = kNoConstraintMargin;
  for (int theta = 0; theta < 2; ++theta) {
    if (s.count(theta) == 0) continue;
    // only ratings that actually serve some client carry a constraint
    const double q1 = partner_rating1_prob(theta, s);
    const double serve = q1 * plan.quality(1, theta) + (1.0 - q1) * plan.quality(0, theta);
    if (serve <= 0.0) continue;
    best = std::min(best, detection_strength(theta, rule, params.report_error) * (gamma.v1 - gamma.v0) - need);
  }
  return best;
}

double ic_bruteforce_gain(const Plan& plan, const RatingDistribution& s, const PayoffPair& gamma,
                          const RatingUpdateRule& rule, const GameParams& params) {
  const double delta = params.discount, eps = params.report_error;
  double worst = -kInf;
  for (int theta = 0; theta < 2; ++theta) {
    if (s.count(theta) == 0) continue;
    const double u = stage_payoff(theta, s, plan, plan, params);
    const double p = compliance_up_probability(theta, plan, s, rule, eps);
    for (int id = 0; id < 16; ++id) {
      const Plan dev = Plan::from_id(id);
      if (dev == plan) continue;
      const double ud = stage_payoff(theta, s, plan, dev, params);
      const double pd = deviation_up_probability(theta, plan, dev, s, rule, eps);
      worst = std::max(worst, (1.0 - delta) * (ud - u) + delta * (pd - p) * (gamma.v1 - gamma.v0));
    }
  }
  return worst;
}

DeltaBound delta_lower_bound(const RatingUpdateRule& rule, const GameParams& params, double xi, Z3Source src,
                             double z3_slack) {
  const Geometry g = build_geometry(params, xi, src, z3_slack);
  const double d = g.spread_floor(), eps = params.report_error, b = params.benefit, c = params.cost;
  const int n = params.n_users;
  DeltaBound out;
  for (int theta = 0; theta < 2; ++theta) {
    const double k = detection_strength(theta, rule, eps);
    out.ic = std::max(out.ic, k > 0.0 ? c / (c + k * d) : kInf);
  }
  const double x0 = x0_plus(rule, eps);
  for (int s1 = 1; s1 <= n - 1; ++s1) {
    const double w = double(s1) / (n - 1) * b + double(n - s1) / (n - 1) * c;
    if (!(w > d)) continue;
    const double den = d * (x_fair(s1, n, rule, eps) - x0) - w;
    out.fair = std::max(out.fair, den < 0.0 ? (d - w) / den : kInf);
  }
  const double lo = ((1.0 + g.kappa1) * d - g.z3) / g.kappa1;
  const double hi = (g.kappa1 * g.z2 + (g.kappa2 - 1.0) * g.z3) / (g.kappa1 + g.kappa2);
  for (int theta = 0; theta < 2; ++theta) {
    const double k = detection_strength(theta, rule, eps);
    const double x = theta ? x1_plus(rule, eps) : x0;
    if (k <= 0.0) {
      out.uniform = kInf;
      continue;
    }
    const double a = b - c + c * x / k;
    const double den = a + hi - lo;
    out.uniform = std::max(out.uniform, den > 0.0 ? a / den : kInf);
  }
  out.bound = std::max({out.ic, out.fair, out.uniform});
  out.feasible = out.bound < 1.0;
  return out;
}

double whitewash_benefit(const Geometry& geo, double xi) {
  return (1.0 - 1.0 / geo.kappa1 - 1.0 / geo.kappa2) * xi;
}

bool is_whitewash_proof(double cost, const Geometry& geo, double xi) { return cost > whitewash_benefit(geo, xi); }

}  // namespace rf
