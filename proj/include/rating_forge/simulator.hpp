#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rating_forge/core_model.hpp"

namespace rf {

// Counter-based uniform stream: value depends only on (seed, period, user, purpose).
enum class Stream : std::uint64_t { Matching = 1, Report = 2, Update = 3, Init = 4 };

std::uint64_t stream_key(std::uint64_t seed, std::uint64_t period, std::uint64_t user, Stream purpose);
double stream_uniform(std::uint64_t seed, std::uint64_t period, std::uint64_t user, Stream purpose);

// Uniform derangement by rejection from uniform permutations; server i serves client out[i].
template <class Rng>
std::vector<int> sample_matching(int n, Rng& rng) {
  if (n < 2) throw ValidationError("matching needs at least two users");
  std::vector<int> perm(n);
  for (;;) {
    for (int i = 0; i < n; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) ok = perm[i] != i;
    if (ok) return perm;
  }
}

// Something that recommends a plan per period from the rating distribution alone.
class PlanPolicy {
 public:
  virtual ~PlanPolicy() = default;
  virtual Plan recommend(const RatingDistribution& s) = 0;
  virtual void advance(const RatingDistribution& s, const Plan& plan) = 0;
  virtual std::unique_ptr<PlanPolicy> clone() const = 0;
  // continuation pair if the policy keeps one
  virtual std::optional<std::pair<double, double>> continuation() const { return std::nullopt; }
};

class StationaryPolicy : public PlanPolicy {
 public:
  explicit StationaryPolicy(std::vector<Plan> plan_of) : plan_of_(std::move(plan_of)) {}
  Plan recommend(const RatingDistribution& s) override { return plan_of_.at(s.s1); }
  void advance(const RatingDistribution&, const Plan&) override {}
  std::unique_ptr<PlanPolicy> clone() const override { return std::make_unique<StationaryPolicy>(*this); }

 private:
  std::vector<Plan> plan_of_;
};

struct StepResult {
  std::vector<int> next;
  std::vector<double> payoff;
};

// own_plans[i] is the plan user i actually plays; the recommended plan drives rating updates.
StepResult step(const std::vector<int>& profile, const Plan& recommended, const std::vector<Plan>& own_plans,
                const RatingUpdateRule& rule, const GameParams& params, std::uint64_t seed, std::uint64_t period);

StepResult step(const std::vector<int>& profile, const Plan& plan, const RatingUpdateRule& rule,
                const GameParams& params, std::uint64_t seed, std::uint64_t period);

enum class DeviantStrategy { Comply, AlwaysSelfish, Dev0, Dev1 };
DeviantStrategy parse_deviant(const std::string& s);

struct SimConfig {
  GameParams params;
  RatingUpdateRule rule;
  long horizon = 0;  // 0 means derive from payoff_truncation_tol
  std::uint64_t seed = 1;
  std::vector<int> initial_profile;
  double payoff_truncation_tol = 1e-4;
};

long truncation_horizon(double discount, double benefit, double tol);

struct TraceRecord {
  long period;
  int s0, s1;
  Plan plan;
  double v0, v1;
  double mean_payoff0, mean_payoff1;
};

struct Trace {
  std::vector<TraceRecord> records;
  std::vector<double> discounted;  // per user
  double tail_bound = 0.0;
  double mean() const;
  bool engine_failed = false;
  std::string failure;
};

Trace run_nonstationary(const SimConfig& cfg, const PlanPolicy& policy, bool keep_records = false,
                        int deviant = -1, DeviantStrategy deviant_strategy = DeviantStrategy::Comply);

struct Summary {
  double mean = 0.0;
  double se = 0.0;
  int n = 0;
  int failures = 0;
};

Summary summarize(const std::vector<double>& xs);

struct MultiSeedResult {
  Summary payoff;
  std::vector<double> per_seed;
  int failures = 0;
  std::string first_failure;
};

MultiSeedResult run_seeds(const SimConfig& base, const PlanPolicy& policy, int seeds, int threads = 0);

struct ProbeResult {
  Summary gain;         // deviant payoff minus compliant payoff, paired by seed
  Summary deviant;      // deviant's payoff
  Summary compliant;    // same user's payoff when complying
};

ProbeResult run_deviation_probe(const SimConfig& base, const PlanPolicy& policy, int deviant,
                                DeviantStrategy strategy, int seeds, int threads = 0);

}  // namespace rf
