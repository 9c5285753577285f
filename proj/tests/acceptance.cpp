// One PASS/FAIL line per acceptance criterion, with the measured numbers next to it.
// Exit status is nonzero when any line fails.

#include <boost/math/distributions/chi_squared.hpp>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "rating_forge/inefficiency_bound.hpp"
#include "rating_forge/mechanism_design.hpp"
#include "rating_forge/simulator.hpp"
#include "rating_forge/stationary_baseline.hpp"
#include "rating_forge/strategy_engine.hpp"

using namespace rf;

namespace {

int g_failed = 0;
int g_threads = 0;
auto g_start = std::chrono::steady_clock::now();

double elapsed() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - g_start).count();
}

void verdict(const char* id, bool ok, const std::string& detail) {
  std::printf("criterion %-3s %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  g_failed += !ok;
}

void note(const std::string& s) {
  std::printf("    [%7.1fs] %s\n", elapsed(), s.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

GameParams game(int n, double eps, double delta) {
  GameParams p;
  p.n_users = n;
  p.benefit = 3;
  p.cost = 1;
  p.report_error = eps;
  p.discount = delta;
  return p;
}

// ten-user design used for 4-7 and 9
const RatingUpdateRule kDesignRule = RatingUpdateRule::make(0.998, 0.05, 0.01, 1.0);
constexpr double kXi = 0.1;
constexpr double kSlack = 3.0;

struct DesignState {
  GameParams params;
  CertifiedDelta cert;
  bool established = false;
  double delta_bound = NAN;   // analytic if below one, else certified, else nan
  double run_delta = NAN;     // delta the simulations use
  bool run_delta_is_diagnostic = true;
};

DesignState prepare_design() {
  DesignState d;
  d.params = game(10, 0.1, 0.99);
  d.cert = certified_delta(d.params, kDesignRule, kXi, Z3Source::Lifted, kSlack, 50, 0.5, g_threads);
  if (d.cert.analytic.feasible) d.delta_bound = d.cert.analytic.bound;
  if (d.cert.found) d.delta_bound = d.cert.delta;
  d.established = !std::isnan(d.delta_bound);
  if (d.established) {
    d.run_delta = std::min(d.delta_bound + 0.01, 1.0 - 1e-6);
    d.run_delta_is_diagnostic = false;
  } else {
    double best = -1;
    for (auto [delta, frac] : d.cert.scan)
      if (frac > best) {
        best = frac;
        d.run_delta = delta;
      }
  }
  d.params.discount = d.run_delta;
  return d;
}

SimConfig sim_config(const GameParams& p, const std::vector<int>& init, long horizon = 0) {
  SimConfig c;
  c.params = p;
  c.rule = kDesignRule;
  c.seed = 1;
  c.horizon = horizon;
  c.initial_profile = init;
  return c;
}

// ---- 1, 2, 3(N=5) ---------------------------------------------------------

void stationary_tables(std::map<double, SearchResult>& out) {
  const std::vector<double> deltas{0.7, 0.8, 0.9, 0.99, 0.999, 0.9999, 0.99999};
  SearchOptions opt;
  opt.subset = PlanSubset::AFS;
  opt.grid_step = 0.1;
  opt.space = StrategySpace::Full;
  opt.threads = g_threads;
  for (double d : deltas) {
    out[d] = search(game(5, 0.1, d), opt);
    note(fmt("N=5 afs search delta=%g normalized=%.4f min_beta1_down=%.1f rule=(%g %g %g %g) strategy=%s", d,
             out[d].normalized, out[d].min_beta1_down_optimal, out[d].rule.beta_up[1], out[d].rule.beta_down[1],
             out[d].rule.beta_up[0], out[d].rule.beta_down[0], out[d].strategy.encode().c_str()));
  }
}

void criterion1(const std::map<double, SearchResult>& res) {
  const std::vector<std::pair<double, double>> want{{0.7, 0.690},  {0.8, 0.700},   {0.9, 0.715},
                                                    {0.99, 0.720}, {0.999, 0.720}, {0.9999, 0.720}};
  bool ok = true;
  std::string d;
  for (auto [delta, w] : want) {
    const double got = res.at(delta).normalized;
    ok &= std::abs(got - w) <= 0.005;
    d += fmt("%g:%.4f(want %.3f) ", delta, got, w);
  }
  verdict("1", ok, "best stationary welfare, tol 0.005: " + d);
}

void criterion2(const std::map<double, SearchResult>& res) {
  const std::vector<std::pair<double, double>> want{{0.7, 0.8},   {0.8, 0.8},    {0.9, 0.6},    {0.99, 0.6},
                                                    {0.999, 0.3}, {0.9999, 0.3}, {0.99999, 0.3}};
  bool ok = true;
  std::string d;
  for (auto [delta, w] : want) {
    const double got = res.at(delta).min_beta1_down_optimal;
    ok &= std::abs(got - w) < 1e-9;
    d += fmt("%g:%.1f(want %.1f) ", delta, got, w);
  }
  verdict("2", ok, "min beta1_down on the 0.1 grid: " + d);
}

void criterion3(const std::map<double, SearchResult>& res) {
  const double at5 = res.at(0.9999).normalized;
  const bool plateau = std::abs(res.at(0.9999).normalized - res.at(0.999).normalized) < 1e-3;
  const bool ok5 = std::abs(at5 - 0.720) <= 0.005;
  verdict("3a", ok5, fmt("price of stationarity N=5 eps=0.1: %.4f (want 0.720 +-0.005), plateau %s", at5,
                         plateau ? "yes" : "no"));

  const std::vector<double> schedule{0.7, 0.8, 0.9, 0.99, 0.999, 0.9999};
  SearchOptions opt;
  opt.subset = PlanSubset::AFS;
  opt.grid_step = 0.1;
  opt.space = StrategySpace::Threshold;
  opt.threads = g_threads;
  std::vector<double> ratios;
  std::string d;
  for (int k = 1; k <= 9; ++k) {
    const double eps = 0.05 * k;
    const PostatResult r = postat(game(10, eps, 0.9), schedule, opt);
    ratios.push_back(r.ratio);
    d += fmt("%.2f:%.4f ", eps, r.ratio);
    note(fmt("N=10 threshold price of stationarity eps=%.2f: %.4f", eps, r.ratio));
  }
  // non-increasing, and strictly so while still positive
  bool mono = true;
  for (size_t k = 1; k < ratios.size(); ++k)
    mono &= ratios[k - 1] > 0.0 ? ratios[k] < ratios[k - 1] : ratios[k] <= ratios[k - 1];
  const bool zero_tail = ratios.back() == 0.0;
  verdict("3b", mono && zero_tail,
          fmt("N=10 threshold: decreasing (strictly while positive) %s, zero at eps=0.45 %s; ", mono ? "yes" : "no",
              zero_tail ? "yes" : "no") + d);
}

// ---- 4 to 7, 9 -------------------------------------------------------------

void criterion4(const DesignState& ds) {
  const auto cond = check_conditions(kDesignRule, ds.params);
  const double target = 3.0 - 1.0 - kXi;
  const Geometry geo = build_geometry(ds.params, kXi, Z3Source::Lifted, kSlack);
  bool ok = ds.established && cond.all();
  std::string d = fmt("conditions %s, bound %s, delta used %.6g%s; ", cond.all() ? "hold" : "fail",
                      ds.established ? fmt("%.6g", ds.delta_bound).c_str() : "not established", ds.run_delta,
                      ds.run_delta_is_diagnostic ? " (diagnostic: best certificate scan point)" : "");
  try {
    const StrategyEngine eng(ds.params, kDesignRule, geo);
    for (const auto& [name, init] : std::vector<std::pair<std::string, std::vector<int>>>{
             {"zeros", std::vector<int>(10, 0)}, {"ones", std::vector<int>(10, 1)}}) {
      const MultiSeedResult r = run_seeds(sim_config(ds.params, init), EnginePolicy(eng), 200, g_threads);
      const bool pass = r.failures == 0 && r.payoff.mean >= target - 3 * r.payoff.se;
      ok &= pass;
      d += fmt("%s: mean %.4f se %.4f need >= %.4f, engine failures %d/200; ", name.c_str(), r.payoff.mean,
               r.payoff.se, target - 3 * r.payoff.se, r.failures);
      if (!r.first_failure.empty()) note("first failure (" + name + "): " + r.first_failure);
    }
  } catch (const std::exception& e) {
    ok = false;
    d += std::string("engine could not be built: ") + e.what();
  }
  verdict("4", ok, d);
}

void criterion5(const DesignState& ds) {
  const Geometry geo = build_geometry(ds.params, kXi, Z3Source::Lifted, kSlack);
  bool ok = ds.established;
  std::string d = ds.established ? "" : "bound not established, probe run at diagnostic delta; ";
  const std::vector<int> init(10, 0);
  try {
    const StrategyEngine eng(ds.params, kDesignRule, geo);
    const MultiSeedResult fail_check = run_seeds(sim_config(ds.params, init), EnginePolicy(eng), 200, g_threads);
    const ProbeResult pr =
        run_deviation_probe(sim_config(ds.params, init), EnginePolicy(eng), 0, DeviantStrategy::AlwaysSelfish, 200,
                            g_threads);
    const bool pass = fail_check.failures == 0 && pr.gain.mean <= 3 * pr.gain.se;
    ok &= pass;
    d += fmt("engine deviant gain %+.5f se %.5f (engine failures %d/200); ", pr.gain.mean, pr.gain.se,
             fail_check.failures);
  } catch (const std::exception& e) {
    ok = false;
    d += std::string("engine could not be built: ") + e.what() + "; ";
  }
  StationaryPolicy alt(std::vector<Plan>(11, plans::ALTRUISTIC));
  const ProbeResult ctl =
      run_deviation_probe(sim_config(ds.params, init, 20000), alt, 0, DeviantStrategy::AlwaysSelfish, 200, g_threads);
  const bool ctl_ok = ctl.gain.mean > 3 * ctl.gain.se;
  ok &= ctl_ok;
  d += fmt("control (all altruistic) gain %+.5f se %.5f %s", ctl.gain.mean, ctl.gain.se,
           ctl_ok ? "positive" : "not positive");
  verdict("5", ok, d);
}

void criterion6(const DesignState& ds) {
  if (!ds.established) {
    std::string scan;
    for (auto [delta, frac] : ds.cert.scan) scan += fmt("%.7g:%.4f ", delta, frac);
    verdict("6", false,
            fmt("no discount bound below one (analytic %.6g: ic %.6g fair %.6g uniform %.6g) and no scanned "
                "discount certifies; pass fractions ",
                ds.cert.analytic.bound, ds.cert.analytic.ic, ds.cert.analytic.fair, ds.cert.analytic.uniform) +
                scan);
    return;
  }
  GameParams p = ds.params;
  p.discount = std::min(ds.delta_bound + 0.001, 1.0 - 1e-7);
  const Geometry geo = build_geometry(p, kXi, Z3Source::Lifted, kSlack);
  const CertificateReport r = certify(p, kDesignRule, geo, 50, 1e-9, 1e-9, g_threads);
  verdict("6", r.passed(),
          fmt("delta %.6g, %ld points, %ld membership and %ld IC failures, worst miss %.3g, worst IC %.3g %s",
              p.discount, r.points, r.membership_failures, r.ic_failures, r.worst_violation, r.worst_ic,
              r.first_failure.c_str()));
}

void criterion7(const DesignState& ds) {
  const Geometry geo = build_geometry(ds.params, kXi, Z3Source::Lifted, kSlack);
  std::vector<int> init(10, 0);
  for (int i = 0; i < 5; ++i) init[i] = 1;
  SimConfig c = sim_config(ds.params, init, 100000);
  try {
    const StrategyEngine eng(ds.params, kDesignRule, geo);
    const Trace tr = run_nonstationary(c, EnginePolicy(eng), true);
    std::set<int> seen;
    std::map<int, std::set<int>> by_state;
    for (const auto& r : tr.records) {
      seen.insert(r.plan.id());
      by_state[r.s1].insert(r.plan.id());
    }
    int witness = -1;
    for (auto& [s1, ps] : by_state)
      if (ps.size() > 1) witness = s1;
    const bool all3 = seen.count(plans::ALTRUISTIC.id()) && seen.count(plans::FAIR.id()) &&
                      seen.count(plans::SELFISH.id());
    const bool ok = !tr.engine_failed && long(tr.records.size()) == 100000 && all3 && witness >= 0;
    verdict("7", ok,
            fmt("%zu periods completed%s; plans seen %zu; witness state %s", tr.records.size(),
                tr.engine_failed ? (" then " + tr.failure).c_str() : "", seen.size(),
                witness >= 0 ? fmt("s1=%d", witness).c_str() : "none"));
  } catch (const std::exception& e) {
    verdict("7", false, std::string("engine could not be built: ") + e.what());
  }
}

void criterion9(const DesignState& ds) {
  SimConfig base = sim_config(ds.params, std::vector<int>(10, 0));
  const std::vector<double> eps_hat{0.05, 0.075, 0.1, 0.125, 0.15};
  const auto rows = run_robustness(base, kXi, eps_hat, 100, g_threads, Z3Source::Lifted, kSlack);
  bool ok = ds.established;
  std::string d = ds.established ? "" : "bound not established (diagnostic delta); ";
  for (const auto& r : rows) {
    if (r.infeasible) {
      ok = false;
      d += fmt("%.3g: infeasible (%s); ", r.assumed_eps, r.reason.c_str());
      continue;
    }
    const double hi = std::abs(r.delta_pct) + 1.96 * r.delta_se_pct;
    ok &= r.failures == 0 && hi < 5.0;
    d += fmt("%.3g: %+.3f%% (se %.3f, failures %d); ", r.assumed_eps, r.delta_pct, r.delta_se_pct, r.failures);
  }
  verdict("9", ok, "welfare change, percent of b-c, 100 seeds: " + d);
}

// ---- 8 --------------------------------------------------------------------

void criterion8() {
  BoundOptions bo;
  bo.threads = g_threads;
  bool pos = true;
  std::string d;
  std::map<double, double> zeta_at;
  for (int k = 1; k <= 9; ++k) {
    const double eps = 0.05 * k;
    const BoundResult r = zeta_over_rules(game(5, eps, 0.9), 0.1, bo);
    zeta_at[eps] = r.zeta;
    pos &= r.found && r.zeta > 0.0;
    d += fmt("%.2f:%.4f ", eps, r.zeta);
  }
  verdict("8a", pos, "zeta(eps) > 0 at N=5 (minimum over the 0.1 rule grid): " + d);

  bool same = true;
  const auto rule = RatingUpdateRule::make(0.95, 0.3, 0.6, 0.8);
  const double ref = zeta(game(5, 0.1, 0.7), rule, bo).zeta;
  for (double delta : {0.8, 0.9, 0.99, 0.9999}) same &= zeta(game(5, 0.1, delta), rule, bo).zeta == ref;
  verdict("8b", same, fmt("zeta identical across discount inputs: %.6f", ref));

  SearchOptions so;
  so.subset = PlanSubset::AS;
  so.grid_step = 0.1;
  so.threads = g_threads;
  const SearchResult best = search(game(5, 0.1, 0.9999), so);
  const double bound = 2.0 - zeta_at[0.1];
  verdict("8c", best.welfare <= bound + 1e-9,
          fmt("best altruistic/selfish stationary welfare at 0.9999: %.4f <= b-c-zeta = %.4f", best.welfare, bound));
}

// ---- 10 -------------------------------------------------------------------

void criterion10() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0, 1);

  // chi-square of simulated one-step counts against the exact law
  double worst_p = 1.0;
  for (int trial = 0; trial < 12; ++trial) {
    const int n = 4 + trial % 4;
    const auto r = RatingUpdateRule::make(u(rng), u(rng), u(rng), u(rng));
    const GameParams p = game(n, 0.4 * u(rng), 0.9);
    const int s1 = 1 + int(rng() % (n - 1));
    std::vector<int> prof(n, 0);
    for (int i = 0; i < s1; ++i) prof[i] = 1;
    const Plan plan = trial % 3 == 0 ? plans::ALTRUISTIC : trial % 3 == 1 ? plans::FAIR : plans::SELFISH;
    const auto law = distribution_transition({n - s1, s1}, plan, r, p.report_error, KernelMode::Exact);
    const int draws = 20000;
    std::vector<int> cnt(n + 1, 0);
    for (int t = 0; t < draws; ++t) {
      const auto res = step(prof, plan, r, p, 100 + trial, std::uint64_t(t));
      int ones = 0;
      for (int x : res.next) ones += x;
      ++cnt[ones];
    }
    // pool cells with small expectation into one bin
    double chi = 0.0, pool_e = 0.0, pool_o = 0.0;
    int cells = 0;
    for (int k = 0; k <= n; ++k) {
      const double e = law[k] * draws;
      if (e < 5.0) {
        pool_e += e;
        pool_o += cnt[k];
        continue;
      }
      chi += (cnt[k] - e) * (cnt[k] - e) / e;
      ++cells;
    }
    if (pool_e > 0.0) {
      chi += (pool_o - pool_e) * (pool_o - pool_e) / std::max(pool_e, 1e-300);
      ++cells;
    }
    if (cells < 2) continue;
    boost::math::chi_squared dist(cells - 1);
    worst_p = std::min(worst_p, 1.0 - boost::math::cdf(dist, chi));
  }
  // 12 tests, so also report the Bonferroni view
  verdict("10a", worst_p > 0.001, fmt("kernel chi-square, smallest p over 12 tests %.4g (need > 0.001)", worst_p));

  double worst_round = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const auto r = RatingUpdateRule::make(0.5 + 0.5 * u(rng), 0.5 * u(rng), 0.5 * u(rng) + 0.3, 0.5 + 0.5 * u(rng));
    const int n = 3 + int(rng() % 8);
    const GameParams p = game(n, 0.45 * u(rng), 0.5 + 0.4999 * u(rng));
    const int s1 = 1 + int(rng() % (n - 1));
    const Plan plan = k % 3 == 0 ? plans::ALTRUISTIC : k % 3 == 1 ? plans::FAIR : plans::SELFISH;
    const PayoffPair v{3 * u(rng) - 1, 3 * u(rng) - 1};
    try {
      const PayoffPair c = decompose(v, {n - s1, s1}, plan, r, p);
      const PayoffPair b = recompose(c, {n - s1, s1}, plan, r, p);
      worst_round = std::max({worst_round, std::abs(b.v0 - v.v0), std::abs(b.v1 - v.v1)});
    } catch (const InfeasibleError&) {
    }
  }
  verdict("10b", worst_round < 1e-9, fmt("decompose/recompose worst error %.3g over 1e4 instances", worst_round));

  int disagree = 0, compared = 0;
  for (int k = 0; k < 10000; ++k) {
    const auto r = RatingUpdateRule::make(u(rng), u(rng), u(rng), u(rng));
    const int n = 3 + int(rng() % 8);
    const GameParams p = game(n, 0.45 * u(rng), 0.5 + 0.4999 * u(rng));
    const int s1 = int(rng() % (n + 1));
    const Plan plan = (k % 2 == 0 || s1 == 0 || s1 == n) ? plans::ALTRUISTIC : plans::FAIR;
    const PayoffPair g{u(rng), u(rng) + 0.5 * u(rng)};
    const double m = ic_margin(plan, {n - s1, s1}, g, r, p);
    const double gain = ic_bruteforce_gain(plan, {n - s1, s1}, g, r, p);
    if (std::abs(m) < 1e-12) continue;
    ++compared;
    disagree += (m >= 0) != (gain <= 1e-12);
  }
  verdict("10c", disagree == 0,
          fmt("closed-form IC margin vs 16-plan enumeration: %d sign disagreements in %d instances", disagree,
              compared));
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* env = std::getenv("RATING_FORGE_THREADS")) g_threads = std::atoi(env);
  bool quick = false;
  for (int i = 1; i < argc; ++i)
    if (std::string(argv[i]) == "--skip-tables") quick = true;

  criterion10();
  criterion8();

  note("designing the ten-user mechanism");
  const DesignState ds = prepare_design();
  note(fmt("analytic bound %.6g, certified %s", ds.cert.analytic.bound,
           ds.cert.found ? fmt("%.6g", ds.cert.delta).c_str() : "none"));
  criterion6(ds);
  criterion4(ds);
  criterion5(ds);
  criterion7(ds);
  criterion9(ds);

  if (!quick) {
    std::map<double, SearchResult> tables;
    stationary_tables(tables);
    criterion1(tables);
    criterion2(tables);
    criterion3(tables);
  } else {
    std::printf("criteria 1-3 skipped (--skip-tables)\n");
  }

  std::printf("%d criteria line(s) failed, %.0fs\n", g_failed, elapsed());
  return g_failed ? 1 : 0;
}
