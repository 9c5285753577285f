// rating-forge command line front end.
#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "rating_forge/config.hpp"
#include "rating_forge/inefficiency_bound.hpp"
#include "rating_forge/mechanism_design.hpp"
#include "rating_forge/stationary_baseline.hpp"
#include "rating_forge/strategy_engine.hpp"

namespace fs = std::filesystem;
using namespace rf;

namespace {

struct Options {
  std::string command;
  std::string config_path;
  std::string out_dir = ".";
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<double> eps, xi, grid_step;
  std::optional<std::string> delta, subset;
  std::optional<long> horizon;
  std::optional<int> seeds;
  bool certify = false;
  std::string baseline;
  std::string deviant_strategy;
};

std::string num(double v) { return fmt::format("{:.10g}", v); }

class Csv {
 public:
  Csv(const fs::path& path, const std::string& provenance, const std::vector<std::string>& header) : path_(path) {
    out_.open(path, std::ios::binary);
    if (!out_) throw ValidationError("cannot write " + path.string());
    out_ << "# " << provenance << "\n";
    row(header);
  }
  void row(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << "\n";
    out_.flush();
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
  std::ofstream out_;
};

struct Context {
  Options opt;
  Config cfg;
  GameParams params;
  RatingUpdateRule rule;
  int threads = 0;
  std::uint64_t seed = 1;

  std::string provenance() const {
    return fmt::format("rating-forge {} config={} seed={}", opt.command, cfg.hash(), seed);
  }
  fs::path out(const std::string& name) const { return fs::path(opt.out_dir) / name; }
  double xi() const { return opt.xi ? *opt.xi : cfg.get_double("design.xi", 0.1); }
  double z3_slack() const { return cfg.get_double("design.z3_slack", 1.0); }
  Z3Source z3_source() const {
    const std::string s = cfg.get("design.z3_source", "lifted");
    if (s == "lifted") return Z3Source::Lifted;
    if (s == "literal") return Z3Source::Literal;
    if (s == "alternate") return Z3Source::AlternateForm;
    throw ValidationError("design.z3_source must be lifted, literal or alternate");
  }
  int grid() const { return int(cfg.get_int("design.certificate_grid", 50)); }
  int seeds() const { return opt.seeds ? *opt.seeds : int(cfg.get_int("sim.seeds", 200)); }
  long horizon() const { return opt.horizon ? *opt.horizon : cfg.get_int("sim.horizon", 0); }
  PlanSubset subset() const { return parse_subset(opt.subset ? *opt.subset : cfg.get("search.subset", "afs")); }
  double grid_step() const { return opt.grid_step ? *opt.grid_step : cfg.get_double("search.grid_step", 0.1); }
};

std::vector<int> initial_profile(const std::string& kind, int n) {
  if (kind == "zeros") return std::vector<int>(n, 0);
  if (kind == "ones") return std::vector<int>(n, 1);
  if (kind == "alternating") {
    std::vector<int> v(n);
    for (int i = 0; i < n; ++i) v[i] = i % 2;
    return v;
  }
  if (int(kind.size()) == n && kind.find_first_not_of("01") == std::string::npos) {
    std::vector<int> v(n);
    for (int i = 0; i < n; ++i) v[i] = kind[i] - '0';
    return v;
  }
  throw ValidationError("initial profile must be zeros, ones, alternating or an N-digit 0/1 string");
}

std::vector<std::string> initial_kinds(const Context& ctx) {
  const std::string s = ctx.cfg.get("sim.initial", "both");
  if (s == "both") return {"zeros", "ones"};
  return {s};
}

// Discount used by design-driven experiments: explicit value, or "auto" = bound + sim.delta_offset.
double design_delta(Context& ctx, std::string* how = nullptr) {
  const std::string d = ctx.opt.delta ? *ctx.opt.delta : ctx.cfg.get("sim.delta", "auto");
  if (d != "auto") {
    const double v = std::stod(d);
    if (how) *how = "explicit";
    return v;
  }
  const double offset = ctx.cfg.get_double("sim.delta_offset", 0.01);
  const CertifiedDelta cd = certified_delta(ctx.params, ctx.rule, ctx.xi(), ctx.z3_source(), ctx.z3_slack(),
                                            ctx.grid(), 0.5, ctx.threads);
  double base;
  if (cd.found) {
    base = cd.delta;
    if (how) *how = "certified";
  } else if (cd.analytic.feasible) {
    base = cd.analytic.bound;
    if (how) *how = "analytic (certificate not found)";
  } else {
    throw InfeasibleError("no discount bound below 1: analytic bound " + num(cd.analytic.bound) +
                          ", no certified value on the scan");
  }
  return std::min(base + offset, 1.0 - 1e-9);
}

SimConfig sim_config(const Context& ctx, const GameParams& p) {
  SimConfig sc;
  sc.params = p;
  sc.rule = ctx.rule;
  sc.horizon = ctx.horizon();
  sc.seed = ctx.seed;
  sc.payoff_truncation_tol = ctx.cfg.get_double("sim.truncation_tol", 1e-4);
  sc.initial_profile = std::vector<int>(p.n_users, 0);
  return sc;
}

// ---------------------------------------------------------------- commands

int cmd_check_rule(Context& ctx) {
  const ConditionReport r = check_conditions(ctx.rule, ctx.params);
  Csv csv(ctx.out("check-rule.csv"), ctx.provenance(), {"condition", "holds", "slack"});
  csv.row({"ordering", r.ordering ? "1" : "0", num(r.ordering_slack)});
  csv.row({"high_retention", r.high_retention ? "1" : "0", num(r.high_retention_slack)});
  csv.row({"low_promotion", r.low_promotion ? "1" : "0", num(r.low_promotion_slack)});
  fmt::print("rule {}: ordering {} ({:+.6f}), high retention {} ({:+.6f}), low promotion {} ({:+.6f})\n",
             ctx.rule.str(), r.ordering, r.ordering_slack, r.high_retention, r.high_retention_slack, r.low_promotion,
             r.low_promotion_slack);
  return r.all() ? 0 : 2;
}

int cmd_design(Context& ctx) {
  const ConditionReport cr = check_conditions(ctx.rule, ctx.params);
  const double xi = ctx.xi();
  const Geometry g = build_geometry(ctx.params, xi, ctx.z3_source(), ctx.z3_slack());
  const CertifiedDelta cd =
      certified_delta(ctx.params, ctx.rule, xi, ctx.z3_source(), ctx.z3_slack(), ctx.grid(), 0.5, ctx.threads);
  Csv csv(ctx.out("design.csv"), ctx.provenance(), {"key", "value"});
  auto kv = [&](const std::string& k, const std::string& v) {
    csv.row({k, v});
    fmt::print("{:<28} {}\n", k, v);
  };
  kv("rule", ctx.rule.str());
  kv("ordering_slack", num(cr.ordering_slack));
  kv("high_retention_slack", num(cr.high_retention_slack));
  kv("low_promotion_slack", num(cr.low_promotion_slack));
  kv("conditions_hold", cr.all() ? "1" : "0");
  kv("kappa1", num(g.kappa1));
  kv("kappa2", num(g.kappa2));
  kv("eps0", num(g.eps0));
  kv("eps1", num(g.eps1));
  kv("z2", num(g.z2));
  kv("z3", num(g.z3));
  kv("z3_min", num(g.z3_min));
  kv("target_v0", num(g.target.v0));
  kv("target_v1", num(g.target.v1));
  kv("region_nonempty", g.nonempty() ? "1" : "0");
  kv("v0_range", num(g.v0_range[0]) + ";" + num(g.v0_range[1]));
  kv("v1_range", num(g.v1_range[0]) + ";" + num(g.v1_range[1]));
  kv("delta_ic", num(cd.analytic.ic));
  kv("delta_fair", num(cd.analytic.fair));
  kv("delta_uniform", num(cd.analytic.uniform));
  kv("delta_bound", num(cd.analytic.bound));
  kv("delta_bound_below_one", cd.analytic.feasible ? "1" : "0");
  kv("certificate_at_start_pass_fraction", num(cd.at_bound.pass_fraction()));
  kv("certified_delta_found", cd.found ? "1" : "0");
  kv("certified_delta", cd.found ? num(cd.delta) : "nan");
  double best_frac = 0.0, best_d = 0.0;
  for (const auto& [d, f] : cd.scan)
    if (f >= best_frac) {
      best_frac = f;
      best_d = d;
    }
  kv("best_scanned_delta", num(best_d));
  kv("best_scanned_pass_fraction", num(best_frac));
  kv("whitewash_benefit", num(whitewash_benefit(g, xi)));
  if (!cr.all()) return 2;
  return cd.found || cd.analytic.feasible ? 0 : 2;
}

int cmd_delta_bound(Context& ctx) {
  std::vector<double> xis = ctx.cfg.get_doubles("design.xi_list", {0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.5});
  if (ctx.opt.xi) xis = {*ctx.opt.xi};
  std::vector<std::string> header{"xi", "delta_ic", "delta_fair", "delta_uniform", "delta_bound", "feasible"};
  if (ctx.opt.certify) {
    header.push_back("certified_delta");
    header.push_back("best_pass_fraction");
  }
  Csv csv(ctx.out("delta-bound.csv"), ctx.provenance(), header);
  bool any = false;
  for (double xi : xis) {
    const DeltaBound db = delta_lower_bound(ctx.rule, ctx.params, xi, ctx.z3_source(), ctx.z3_slack());
    std::vector<std::string> row{num(xi), num(db.ic), num(db.fair), num(db.uniform), num(db.bound),
                                 db.feasible ? "1" : "0"};
    bool ok = db.feasible;
    if (ctx.opt.certify) {
      const CertifiedDelta cd =
          certified_delta(ctx.params, ctx.rule, xi, ctx.z3_source(), ctx.z3_slack(), ctx.grid(), 0.5, ctx.threads);
      double best = 0.0;
      for (const auto& sc : cd.scan) best = std::max(best, sc.second);
      row.push_back(cd.found ? num(cd.delta) : "nan");
      row.push_back(num(best));
      ok = ok || cd.found;
    }
    any = any || ok;
    csv.row(row);
    fmt::print("xi {:<6} bound {:.6f} (ic {:.6f}, fair {:.6f}, uniform {:.6f}){}\n", xi, db.bound, db.ic, db.fair,
               db.uniform, db.feasible ? "" : "  infeasible for this xi");
  }
  return any ? 0 : 2;
}

int cmd_run(Context& ctx) {
  std::string how;
  GameParams p = ctx.params;
  p.discount = design_delta(ctx, &how);
  const Geometry g = build_geometry(p, ctx.xi(), ctx.z3_source(), ctx.z3_slack());
  const StrategyEngine eng(p, ctx.rule, g);
  const int seeds = ctx.seeds();
  Csv csv(ctx.out("run.csv"), ctx.provenance() + fmt::format(" delta={} ({})", num(p.discount), how),
          {"initial", "seeds", "mean_payoff", "se", "target", "margin_se", "failures", "first_failure"});
  int failures = 0;
  for (const std::string& kind : initial_kinds(ctx)) {
    SimConfig sc = sim_config(ctx, p);
    sc.initial_profile = initial_profile(kind, p.n_users);
    const MultiSeedResult r = run_seeds(sc, EnginePolicy(eng), seeds, ctx.threads);
    const double target = p.benefit - p.cost - ctx.xi();
    const double margin = r.payoff.se > 0 ? (r.payoff.mean - target) / r.payoff.se : 0.0;
    failures += r.failures;
    csv.row({kind, std::to_string(seeds), num(r.payoff.mean), num(r.payoff.se), num(target), num(margin),
             std::to_string(r.failures), "\"" + r.first_failure + "\""});
    fmt::print("{:<6} delta {:.6f}: mean {:.6f} se {:.6f} target {:.4f} failures {}\n", kind, p.discount,
               r.payoff.mean, r.payoff.se, target, r.failures);
  }
  return failures ? 2 : 0;
}

int cmd_probe(Context& ctx) {
  GameParams p = ctx.params;
  std::string how = "explicit";
  std::unique_ptr<PlanPolicy> policy;
  const std::string baseline = ctx.opt.baseline.empty() ? ctx.cfg.get("probe.baseline", "engine") : ctx.opt.baseline;
  if (baseline == "engine") {
    p.discount = design_delta(ctx, &how);
    const Geometry g = build_geometry(p, ctx.xi(), ctx.z3_source(), ctx.z3_slack());
    policy = std::make_unique<EnginePolicy>(StrategyEngine(p, ctx.rule, g));
  } else if (baseline == "altruistic") {
    if (ctx.opt.delta && *ctx.opt.delta != "auto") p.discount = std::stod(*ctx.opt.delta);
    policy = std::make_unique<StationaryPolicy>(std::vector<Plan>(p.n_users + 1, plans::ALTRUISTIC));
  } else {
    throw ValidationError("probe baseline must be engine or altruistic");
  }
  const std::string strat = ctx.opt.deviant_strategy.empty() ? ctx.cfg.get("probe.strategy", "always-selfish")
                                                              : ctx.opt.deviant_strategy;
  const int deviant = int(ctx.cfg.get_int("probe.deviant", 0));
  Csv csv(ctx.out("probe.csv"), ctx.provenance() + fmt::format(" delta={} ({}) baseline={}", num(p.discount), how, baseline),
          {"initial", "strategy", "seeds", "gain_mean", "gain_se", "deviant_mean", "compliant_mean"});
  for (const std::string& kind : initial_kinds(ctx)) {
    SimConfig sc = sim_config(ctx, p);
    sc.initial_profile = initial_profile(kind, p.n_users);
    const ProbeResult r = run_deviation_probe(sc, *policy, deviant, parse_deviant(strat), ctx.seeds(), ctx.threads);
    csv.row({kind, strat, std::to_string(r.gain.n), num(r.gain.mean), num(r.gain.se), num(r.deviant.mean),
             num(r.compliant.mean)});
    fmt::print("{:<6} {} deviant gain {:+.6f} (se {:.6f})\n", kind, strat, r.gain.mean, r.gain.se);
  }
  return 0;
}

SearchOptions search_options(const Context& ctx) {
  SearchOptions so;
  so.subset = ctx.subset();
  so.grid_step = ctx.grid_step();
  const std::string space = ctx.cfg.get("search.space", "full");
  if (space == "full") so.space = StrategySpace::Full;
  else if (space == "threshold") so.space = StrategySpace::Threshold;
  else throw ValidationError("search.space must be full or threshold");
  const std::string kernel = ctx.cfg.get("search.kernel", "exact");
  if (kernel == "exact") so.mode = KernelMode::Exact;
  else if (kernel == "independent") so.mode = KernelMode::Independent;
  else throw ValidationError("search.kernel must be exact or independent");
  so.threads = ctx.threads;
  return so;
}

std::vector<std::string> search_row(double delta, const GameParams& p, const SearchOptions& so,
                                    const SearchResult& r) {
  return {num(delta),
          num(p.report_error),
          subset_name(so.subset),
          so.space == StrategySpace::Full ? "full" : "threshold",
          so.mode == KernelMode::Exact && p.n_users <= kExactMatchingLimit ? "exact" : "independent",
          num(r.welfare),
          num(r.normalized),
          "\"" + r.rule.str() + "\"",
          r.found ? r.strategy.encode() : "",
          num(r.min_beta1_down_optimal),
          num(r.min_beta1_down_positive)};
}

const std::vector<std::string> kSearchHeader{"delta",   "eps",     "subset",     "space",
                                             "kernel",  "welfare", "normalized", "rule",
                                             "strategy", "min_beta1_down_optimal", "min_beta1_down_positive"};

int cmd_search(Context& ctx) {
  SearchOptions so = search_options(ctx);
  GameParams p = ctx.params;
  if (ctx.opt.delta) p.discount = std::stod(*ctx.opt.delta);
  if (so.space == StrategySpace::Full && p.n_users > 6)
    throw ValidationError("full strategy space is limited to n_users <= 6; use search.space=threshold");
  so.progress = [](double frac, double best) {
    std::cerr << fmt::format("progress {:.1f}% best normalized {:.4f}\n", 100 * frac, best);
  };
  Csv csv(ctx.out("search-stationary.csv"), ctx.provenance(), kSearchHeader);
  const SearchResult r = search(p, so);
  csv.row(search_row(p.discount, p, so, r));
  fmt::print("delta {} normalized {:.4f} rule {} strategy {}\n", p.discount, r.normalized, r.rule.str(),
             r.strategy.encode());
  return 0;
}

int cmd_postat(Context& ctx) {
  SearchOptions so = search_options(ctx);
  GameParams p = ctx.params;
  const std::vector<double> schedule =
      ctx.cfg.get_doubles("postat.deltas", {0.7, 0.8, 0.9, 0.99, 0.999, 0.9999});
  if (so.space == StrategySpace::Full && p.n_users > 6)
    throw ValidationError("full strategy space is limited to n_users <= 6; use search.space=threshold");
  Csv csv(ctx.out("postat.csv"), ctx.provenance(), kSearchHeader);
  std::vector<double> values;
  for (double d : schedule) {
    // one search per point so interrupted runs keep their rows
    GameParams q = p;
    q.discount = d;
    const SearchResult r = search(q, so);
    csv.row(search_row(d, q, so, r));
    values.push_back(r.normalized);
    std::cerr << fmt::format("delta {} normalized {:.4f}\n", d, r.normalized);
  }
  const bool plateau = values.size() >= 2 && std::abs(values.back() - values[values.size() - 2]) < 1e-3;
  fmt::print("postat {:.4f}{}\n", values.empty() ? 0.0 : values.back(), plateau ? "" : "  (no plateau)");
  return 0;
}

int cmd_zeta(Context& ctx) {
  std::vector<double> eps_list =
      ctx.cfg.get_doubles("zeta.eps_list", {0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45});
  if (ctx.opt.eps) eps_list = {*ctx.opt.eps};
  BoundOptions bo;
  bo.all_plans = ctx.cfg.get("zeta.plans", "as") == "all";
  bo.threads = ctx.threads;
  const bool over_rules = ctx.cfg.get("zeta.rules", "config") == "grid";
  Csv csv(ctx.out("zeta.csv"), ctx.provenance(),
          {"eps", "zeta", "normalized_bound", "argmin_plan", "argmin_s1", "argmin_subset_mask", "rule"});
  for (double eps : eps_list) {
    GameParams p = ctx.params;
    p.report_error = eps;
    RatingUpdateRule r = ctx.rule;
    const BoundResult b = over_rules ? zeta_over_rules(p, ctx.grid_step(), bo, &r) : zeta(p, ctx.rule, bo);
    csv.row({num(eps), num(b.zeta), num(b.normalized_bound), b.found ? b.argmin_plan.name() : "",
             std::to_string(b.argmin_s1), std::to_string(b.argmin_mask), "\"" + r.str() + "\""});
    fmt::print("eps {:<5} zeta {:.6f} bound {:.4f}\n", eps, b.zeta, b.normalized_bound);
  }
  return 0;
}

int cmd_whitewash(Context& ctx) {
  const double xi = ctx.xi();
  const Geometry g = build_geometry(ctx.params, xi, ctx.z3_source(), ctx.z3_slack());
  const double cost = ctx.cfg.get_double("whitewash.cost", 0.0);
  const double benefit = whitewash_benefit(g, xi);
  Csv csv(ctx.out("whitewash.csv"), ctx.provenance(), {"xi", "benefit", "cost", "proof"});
  csv.row({num(xi), num(benefit), num(cost), is_whitewash_proof(cost, g, xi) ? "1" : "0"});
  fmt::print("whitewash benefit {:.6f}, cost {:.6f}: {}\n", benefit, cost,
             is_whitewash_proof(cost, g, xi) ? "proof" : "not proof");
  return 0;
}

int cmd_robustness(Context& ctx) {
  std::string how;
  GameParams p = ctx.params;
  p.discount = design_delta(ctx, &how);
  const double eps = p.report_error;
  const std::vector<double> assumed =
      ctx.cfg.get_doubles("robustness.eps_hat", {0.5 * eps, 0.75 * eps, eps, 1.25 * eps, 1.5 * eps});
  SimConfig sc = sim_config(ctx, p);
  sc.initial_profile = initial_profile(initial_kinds(ctx).front(), p.n_users);
  const auto rows = run_robustness(sc, ctx.xi(), assumed, ctx.seeds(), ctx.threads, ctx.z3_source(), ctx.z3_slack());
  Csv csv(ctx.out("robustness.csv"), ctx.provenance() + fmt::format(" delta={} ({})", num(p.discount), how),
          {"eps_hat", "welfare", "se", "delta_pct", "ci_low_pct", "ci_high_pct", "failures", "infeasible"});
  for (const auto& e : rows) {
    csv.row({num(e.assumed_eps), num(e.welfare.mean), num(e.welfare.se), num(e.delta_pct),
             num(e.delta_pct - 1.96 * e.delta_se_pct), num(e.delta_pct + 1.96 * e.delta_se_pct),
             std::to_string(e.failures), e.infeasible ? "1" : "0"});
    fmt::print("eps_hat {:<6.4g} welfare {:.5f} delta {:+.3f}% (se {:.3f}) failures {}{}\n", e.assumed_eps,
               e.welfare.mean, e.delta_pct, e.delta_se_pct, e.failures, e.infeasible ? " infeasible" : "");
  }
  return 0;
}

int cmd_trace(Context& ctx) {
  std::string how;
  GameParams p = ctx.params;
  p.discount = design_delta(ctx, &how);
  const Geometry g = build_geometry(p, ctx.xi(), ctx.z3_source(), ctx.z3_slack());
  SimConfig sc = sim_config(ctx, p);
  sc.initial_profile = initial_profile(initial_kinds(ctx).front(), p.n_users);
  if (sc.horizon == 0) sc.horizon = ctx.cfg.get_int("trace.periods", 200);
  const Trace tr = run_nonstationary(sc, EnginePolicy(StrategyEngine(p, ctx.rule, g)), true);
  Csv csv(ctx.out("trace.csv"), ctx.provenance() + fmt::format(" delta={} ({})", num(p.discount), how),
          {"period", "s0", "s1", "plan", "v0", "v1", "mean_payoff0", "mean_payoff1"});
  for (const auto& r : tr.records)
    csv.row({std::to_string(r.period), std::to_string(r.s0), std::to_string(r.s1), r.plan.name(), num(r.v0),
             num(r.v1), num(r.mean_payoff0), num(r.mean_payoff1)});
  fmt::print("{} periods written{}\n", tr.records.size(), tr.engine_failed ? ", engine failed: " + tr.failure : "");
  return tr.engine_failed ? 2 : 0;
}

int resolve_threads(const std::optional<int>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("RATING_FORGE_THREADS")) {
    try {
      return std::stoi(env);
    } catch (const std::exception&) {
      throw ValidationError("RATING_FORGE_THREADS is not an integer");
    }
  }
  return 0;
}

void error_line(const char* kind, const std::string& msg) {
  std::string clean = msg;
  std::replace(clean.begin(), clean.end(), '\n', ' ');
  std::cerr << "error kind=" << kind << " message=\"" << clean << "\"\n";
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"rating-forge: rating mechanism design and simulation"};
  app.require_subcommand(1);
  const std::vector<std::pair<std::string, std::string>> commands{
      {"check-rule", "check the three rule conditions"},
      {"design", "geometry, discount bound and certificate for a rule"},
      {"delta-bound", "discount bound over a list of payoff-loss tolerances"},
      {"run", "simulate the nonstationary mechanism over many seeds"},
      {"probe", "estimate a unilateral deviation gain"},
      {"search-stationary", "best stationary mechanism at one discount"},
      {"postat", "stationary search along a discount schedule"},
      {"zeta", "welfare gap bound for altruistic/selfish strategies"},
      {"whitewash", "whitewashing benefit and proofness"},
      {"robustness", "welfare change under a misestimated report error"},
      {"trace", "per-period trace of one run"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", o.config_path, "key=value config file");
    sub->add_option("--out", o.out_dir, "output directory");
    sub->add_option("--set", o.overrides, "override section.key=value")->take_all();
    sub->add_option("--seed", o.seed);
    sub->add_option("--threads", o.threads);
    sub->add_option("--eps", o.eps);
    sub->add_option("--xi", o.xi);
    sub->add_option("--delta", o.delta, "discount, or auto");
    sub->add_option("--subset", o.subset, "afs, af, as or fs");
    sub->add_option("--grid-step", o.grid_step);
    sub->add_option("--horizon", o.horizon);
    sub->add_option("--seeds", o.seeds);
    if (name == "delta-bound") sub->add_flag("--certify", o.certify, "add the grid-certified discount");
    if (name == "probe") {
      sub->add_option("--baseline", o.baseline, "engine or altruistic");
      sub->add_option("--strategy", o.deviant_strategy, "always-selfish, dev0, dev1 or comply");
    }
    sub->callback([&o, name = name] { o.command = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  Context ctx;
  ctx.opt = o;
  try {
    if (!o.config_path.empty()) ctx.cfg = Config::load(o.config_path);
    for (const auto& kv : o.overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ValidationError("--set expects key=value, got " + kv);
      ctx.cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    ctx.params = ctx.cfg.game_params();
    if (o.eps) ctx.params.report_error = *o.eps;
    if (o.delta && *o.delta != "auto") ctx.params.discount = std::stod(*o.delta);
    ctx.params.validate();
    ctx.rule = ctx.cfg.rule();
    ctx.rule.validate();
    ctx.threads = resolve_threads(o.threads);
    ctx.seed = o.seed ? *o.seed : std::uint64_t(ctx.cfg.get_int("sim.seed", 1));
    fs::create_directories(o.out_dir);

    if (o.command == "check-rule") return cmd_check_rule(ctx);
    if (o.command == "design") return cmd_design(ctx);
    if (o.command == "delta-bound") return cmd_delta_bound(ctx);
    if (o.command == "run") return cmd_run(ctx);
    if (o.command == "probe") return cmd_probe(ctx);
    if (o.command == "search-stationary") return cmd_search(ctx);
    if (o.command == "postat") return cmd_postat(ctx);
    if (o.command == "zeta") return cmd_zeta(ctx);
    if (o.command == "whitewash") return cmd_whitewash(ctx);
    if (o.command == "robustness") return cmd_robustness(ctx);
    if (o.command == "trace") return cmd_trace(ctx);
    error_line("validation", "unknown command");
    return 1;
  } catch (const ValidationError& e) {
    error_line("validation", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    error_line("validation", e.what());
    return 1;
  } catch (const InfeasibleError& e) {
    error_line("infeasible", e.what());
    return 2;
  } catch (const EngineError& e) {
    error_line("engine", e.what());
    return 2;
  } catch (const std::exception& e) {
    error_line("internal", e.what());
    return 1;
  }
}
