#include "rating_forge/simulator.hpp"

#include <tbb/global_control.h>
#include <tbb/parallel_for.h>

#include <cmath>
#include <numeric>

namespace rf {

namespace {
inline std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

Plan deviant_plan(DeviantStrategy d, const Plan& rec) {
  Plan p = rec;
  switch (d) {
    case DeviantStrategy::Comply: break;
    case DeviantStrategy::AlwaysSelfish: p = plans::SELFISH; break;
    case DeviantStrategy::Dev0:
      for (int s = 0; s < 2; ++s) p.table[0][s] = 0;
      break;
    case DeviantStrategy::Dev1:
      for (int s = 0; s < 2; ++s) p.table[1][s] = 0;
      break;
  }
  return p;
}

int resolve_threads(int threads) {
  if (threads > 0) return threads;
  if (const char* env = std::getenv("RATING_FORGE_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 0;
}
}  // namespace

std::uint64_t stream_key(std::uint64_t seed, std::uint64_t period, std::uint64_t user, Stream purpose) {
  std::uint64_t h = splitmix(seed);
  h = splitmix(h ^ period);
  h = splitmix(h ^ (user * 0x100000001b3ull));
  return splitmix(h ^ static_cast<std::uint64_t>(purpose));
}

double stream_uniform(std::uint64_t seed, std::uint64_t period, std::uint64_t user, Stream purpose) {
  return double(stream_key(seed, period, user, purpose) >> 11) * 0x1.0p-53;
}

DeviantStrategy parse_deviant(const std::string& s) {
  if (s == "comply") return DeviantStrategy::Comply;
  if (s == "always-selfish" || s == "selfish") return DeviantStrategy::AlwaysSelfish;
  if (s == "dev0") return DeviantStrategy::Dev0;
  if (s == "dev1") return DeviantStrategy::Dev1;
  throw ValidationError("unknown deviant strategy '" + s + "'");
}

StepResult step(const std::vector<int>& profile, const Plan& recommended, const std::vector<Plan>& own_plans,
                const RatingUpdateRule& rule, const GameParams& params, std::uint64_t seed, std::uint64_t period) {
  const int n = int(profile.size());
  std::mt19937_64 match_rng(stream_key(seed, period, 0, Stream::Matching));
  const auto client = sample_matching(n, match_rng);
  StepResult out;
  out.next.resize(n);
  out.payoff.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const int j = client[i];
    const int ts = profile[i], tc = profile[j];
    const int q = own_plans[i].quality(tc, ts);
    if (q) {
      out.payoff[i] -= params.cost;
      out.payoff[j] += params.benefit;
    }
    const bool flip = stream_uniform(seed, period, i, Stream::Report) < params.report_error;
    const int r = flip ? 1 - q : q;
    const double u = stream_uniform(seed, period, i, Stream::Update);
    if (r >= recommended.quality(tc, ts))
      out.next[i] = u < rule.beta_up[ts] ? 1 : 0;
    else
      out.next[i] = u < rule.beta_down[ts] ? 0 : 1;
  }
  return out;
}

StepResult step(const std::vector<int>& profile, const Plan& plan, const RatingUpdateRule& rule,
                const GameParams& params, std::uint64_t seed, std::uint64_t period) {
  return step(profile, plan, std::vector<Plan>(profile.size(), plan), rule, params, seed, period);
}

long truncation_horizon(double discount, double benefit, double tol) {
  if (discount <= 0.0) return 1;
  return long(std::ceil(std::log(tol / benefit) / std::log(discount)));
}

double Trace::mean() const {
  if (discounted.empty()) return 0.0;
  return std::accumulate(discounted.begin(), discounted.end(), 0.0) / double(discounted.size());
}

Trace run_nonstationary(const SimConfig& cfg, const PlanPolicy& policy, bool keep_records, int deviant,
                        DeviantStrategy deviant_strategy) {
  const auto& params = cfg.params;
  const int n = params.n_users;
  if (int(cfg.initial_profile.size()) != n) throw ValidationError("initial profile length must equal n_users");
  const long horizon = cfg.horizon > 0 ? cfg.horizon : truncation_horizon(params.discount, params.benefit, cfg.payoff_truncation_tol);
  auto pol = policy.clone();
  Trace tr;
  tr.discounted.assign(n, 0.0);
  std::vector<int> profile = cfg.initial_profile;
  std::vector<Plan> own(n);
  double weight = 1.0 - params.discount;
  for (long t = 0; t < horizon; ++t) {
    RatingProfile rp{profile};
    const RatingDistribution s = rp.distribution();
    Plan plan;
    std::pair<double, double> cont{NAN, NAN};
    try {
      if (auto c = pol->continuation()) cont = *c;
      plan = pol->recommend(s);
    } catch (const std::exception& e) {
      tr.engine_failed = true;
      tr.failure = "period " + std::to_string(t) + ": " + e.what();
      break;
    }
    std::fill(own.begin(), own.end(), plan);
    if (deviant >= 0) own[deviant] = deviant_plan(deviant_strategy, plan);
    const StepResult r = step(profile, plan, own, cfg.rule, params, cfg.seed, std::uint64_t(t));
    for (int i = 0; i < n; ++i) tr.discounted[i] += weight * r.payoff[i];
    if (keep_records) {
      double m0 = 0, m1 = 0;
      for (int i = 0; i < n; ++i) (profile[i] ? m1 : m0) += r.payoff[i];
      tr.records.push_back({t, s.s0, s.s1, plan, cont.first, cont.second, s.s0 ? m0 / s.s0 : 0.0,
                            s.s1 ? m1 / s.s1 : 0.0});
    }
    try {
      pol->advance(s, plan);
    } catch (const std::exception& e) {
      tr.engine_failed = true;
      tr.failure = "period " + std::to_string(t) + ": " + e.what();
      profile = r.next;
      break;
    }
    profile = r.next;
    weight *= params.discount;
  }
  tr.tail_bound = weight / (1.0 - params.discount) * params.benefit;
  return tr;
}

Summary summarize(const std::vector<double>& xs) {
  Summary s;
  s.n = int(xs.size());
  if (xs.empty()) return s;
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / double(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.se = std::sqrt(ss / double(xs.size() - 1) / double(xs.size()));
  }
  return s;
}

MultiSeedResult run_seeds(const SimConfig& base, const PlanPolicy& policy, int seeds, int threads) {
  std::vector<double> per(seeds, 0.0);
  std::vector<std::string> fail(seeds);
  const int t = resolve_threads(threads);
  tbb::global_control gc(tbb::global_control::max_allowed_parallelism,
                         t > 0 ? t : int(tbb::info::default_concurrency()));
  tbb::parallel_for(0, seeds, [&](int k) {
    SimConfig cfg = base;
    cfg.seed = base.seed + std::uint64_t(k);
    Trace tr = run_nonstationary(cfg, policy);
    per[k] = tr.mean();
    if (tr.engine_failed) fail[k] = tr.failure;
  });
  MultiSeedResult out;
  out.per_seed = per;
  out.payoff = summarize(per);
  for (const auto& f : fail)
    if (!f.empty()) {
      if (out.failures++ == 0) out.first_failure = f;
    }
  out.payoff.failures = out.failures;
  return out;
}

ProbeResult run_deviation_probe(const SimConfig& base, const PlanPolicy& policy, int deviant,
                                DeviantStrategy strategy, int seeds, int threads) {
  if (deviant < 0 || deviant >= base.params.n_users) throw ValidationError("deviant index out of range");
  std::vector<double> dev(seeds), comp(seeds), gain(seeds);
  const int t = resolve_threads(threads);
  tbb::global_control gc(tbb::global_control::max_allowed_parallelism,
                         t > 0 ? t : int(tbb::info::default_concurrency()));
  tbb::parallel_for(0, seeds, [&](int k) {
    SimConfig cfg = base;
    cfg.seed = base.seed + std::uint64_t(k);
    const Trace a = run_nonstationary(cfg, policy, false, deviant, strategy);
    const Trace b = run_nonstationary(cfg, policy, false, deviant, DeviantStrategy::Comply);
    dev[k] = a.discounted[deviant];
    comp[k] = b.discounted[deviant];
    gain[k] = dev[k] - comp[k];
  });
  return {summarize(gain), summarize(dev), summarize(comp)};
}

}  // namespace rf
