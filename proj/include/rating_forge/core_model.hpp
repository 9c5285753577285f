#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace rf {

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GameParams {
  int n_users = 5;
  double benefit = 3.0;
  double cost = 1.0;
  double report_error = 0.1;
  double discount = 0.99;

  void validate() const;
};

// Truth table indexed [client_rating][server_rating] -> quality.
struct Plan {
  std::array<std::array<int, 2>, 2> table{};

  constexpr int quality(int client, int server) const { return table[client][server]; }
  constexpr bool operator==(const Plan&) const = default;

  // 4-bit id: bit (2*client + server).
  int id() const;
  static Plan from_id(int id);
  std::string name() const;
  static Plan parse(const std::string& s);
};

namespace plans {
inline constexpr Plan ALTRUISTIC{{{{1, 1}, {1, 1}}}};
inline constexpr Plan FAIR{{{{1, 0}, {1, 1}}}};
inline constexpr Plan SELFISH{{{{0, 0}, {0, 0}}}};
// serve rating-1 clients only
inline constexpr Plan DEV0{{{{0, 0}, {1, 1}}}};
// serve rating-0 clients only
inline constexpr Plan DEV1{{{{1, 1}, {0, 0}}}};
inline constexpr Plan DEV01 = SELFISH;
}  // namespace plans

struct RatingUpdateRule {
  // index = rating
  std::array<double, 2> beta_up{0.5, 0.5};
  std::array<double, 2> beta_down{0.5, 0.5};

  static RatingUpdateRule make(double b1_up, double b1_down, double b0_up, double b0_down);
  void validate() const;
  std::string str() const;
};

struct RatingDistribution {
  int s0 = 0;
  int s1 = 0;
  int n() const { return s0 + s1; }
  int count(int theta) const { return theta ? s1 : s0; }
  bool operator==(const RatingDistribution&) const = default;
};

struct RatingProfile {
  std::vector<int> ratings;
  RatingDistribution distribution() const;
};

// Probability that a user with rating theta meets a rating-1 partner.
double partner_rating1_prob(int theta, const RatingDistribution& s);

double stage_payoff(int theta, const RatingDistribution& s, const Plan& recommended, const Plan& own_plan,
                    const GameParams& params);

// Up-probability for a single service to a client of rating client_theta.
double service_up_probability(int theta, int client_theta, const Plan& recommended, const Plan& own_plan,
                              const RatingUpdateRule& rule, double eps);

double compliance_up_probability(int theta, const Plan& plan, const RatingDistribution& s,
                                 const RatingUpdateRule& rule, double eps);

double deviation_up_probability(int theta, const Plan& recommended, const Plan& own_plan, const RatingDistribution& s,
                                const RatingUpdateRule& rule, double eps);

// Closed-form compliance probabilities.
double x1_plus(const RatingUpdateRule& rule, double eps);
double x0_plus(const RatingUpdateRule& rule, double eps);
double x_fair(int s1, int n, const RatingUpdateRule& rule, double eps);

enum class KernelMode { Exact, Independent };

inline constexpr int kExactMatchingLimit = 8;

// All derangements of {0..n-1}; cached per n, n <= kExactMatchingLimit.
const std::vector<std::vector<int>>& derangements(int n);

// Law of next s1 (vector of length N+1) from distribution s under a common plan.
std::vector<double> distribution_transition(const RatingDistribution& s, const Plan& plan,
                                            const RatingUpdateRule& rule, double eps,
                                            KernelMode mode = KernelMode::Exact,
                                            int exact_limit = kExactMatchingLimit);

// Law of the number of next-period rating-1 users among the N-1 users other than a focal user
// with rating theta, conditioned on the focal user's client having rating client_theta.
// Everyone except the focal user follows `plan`. Length N.
std::vector<double> others_transition(const RatingDistribution& s, int theta, int client_theta, const Plan& plan,
                                      const RatingUpdateRule& rule, double eps, KernelMode mode,
                                      int exact_limit = kExactMatchingLimit);

// Exact law of next s1 when one user with rating theta plays deviant_plan and the rest follow plan.
std::vector<double> deviation_distribution_transition(const RatingDistribution& s, int theta, const Plan& plan,
                                                      const Plan& deviant_plan, const RatingUpdateRule& rule,
                                                      double eps, KernelMode mode,
                                                      int exact_limit = kExactMatchingLimit);

// Everyone plays `played`, ratings are judged against `recommended`, and one rating-theta user plays deviant_plan.
std::vector<double> played_distribution_transition(const RatingDistribution& s, int theta, const Plan& recommended,
                                                   const Plan& played, const Plan& deviant_plan,
                                                   const RatingUpdateRule& rule, double eps, KernelMode mode,
                                                   int exact_limit = kExactMatchingLimit);

std::vector<double> binomial_pmf(int n, double p);
std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b);

template <class Rng>
int sample_report(int quality, double eps, Rng& rng) {
  std::bernoulli_distribution flip(eps);
  return flip(rng) ? 1 - quality : quality;
}

double clamp_probability(double p);

}  // namespace rf
