#include "rating_forge/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <tuple>

namespace rf {

namespace {
constexpr double kProbTol = 1e-12;

void check_distribution(const RatingDistribution& s, int n) {
  if (s.s0 < 0 || s.s1 < 0 || s.n() != n)
    throw ValidationError("rating distribution (" + std::to_string(s.s0) + "," + std::to_string(s.s1) +
                          ") inconsistent with N=" + std::to_string(n));
}

void check_present(int theta, const RatingDistribution& s) {
  if (theta != 0 && theta != 1) throw ValidationError("rating must be 0 or 1");
  if (s.count(theta) < 1) throw ValidationError("no user with rating " + std::to_string(theta) + " in distribution");
}
}  // namespace

double clamp_probability(double p) {
  if (p < -kProbTol || p > 1.0 + kProbTol) throw ValidationError("probability out of range: " + std::to_string(p));
  return std::clamp(p, 0.0, 1.0);
}

void GameParams::validate() const {
  if (n_users < 3) throw ValidationError("n_users must be at least 3");
  if (!(cost > 0.0 && cost < benefit)) throw ValidationError("need 0 < cost < benefit");
  if (!(report_error >= 0.0 && report_error < 0.5)) throw ValidationError("report_error must lie in [0, 0.5)");
  if (!(discount >= 0.0 && discount < 1.0)) throw ValidationError("discount must lie in [0, 1)");
  const double margin = double(n_users - 2) / double(n_users - 1) * benefit - cost;
  if (!(margin > 0.0)) throw ValidationError("((N-2)/(N-1))*b - c must be positive");
}

int Plan::id() const {
  int v = 0;
  for (int c = 0; c < 2; ++c)
    for (int s = 0; s < 2; ++s)
      if (table[c][s]) v |= 1 << (2 * c + s);
  return v;
}

Plan Plan::from_id(int id) {
  if (id < 0 || id > 15) throw ValidationError("plan id must be in 0..15");
  Plan p;
  for (int c = 0; c < 2; ++c)
    for (int s = 0; s < 2; ++s) p.table[c][s] = (id >> (2 * c + s)) & 1;
  return p;
}

std::string Plan::name() const {
  if (*this == plans::ALTRUISTIC) return "altruistic";
  if (*this == plans::FAIR) return "fair";
  if (*this == plans::SELFISH) return "selfish";
  if (*this == plans::DEV0) return "dev0";
  if (*this == plans::DEV1) return "dev1";
  return "plan" + std::to_string(id());
}

Plan Plan::parse(const std::string& s) {
  if (s == "altruistic" || s == "a") return plans::ALTRUISTIC;
  if (s == "fair" || s == "f") return plans::FAIR;
  if (s == "selfish" || s == "s" || s == "dev01") return plans::SELFISH;
  if (s == "dev0") return plans::DEV0;
  if (s == "dev1") return plans::DEV1;
  if (s.rfind("plan", 0) == 0) return from_id(std::stoi(s.substr(4)));
  throw ValidationError("unknown plan '" + s + "'");
}

RatingUpdateRule RatingUpdateRule::make(double b1_up, double b1_down, double b0_up, double b0_down) {
  RatingUpdateRule r;
  r.beta_up = {b0_up, b1_up};
  r.beta_down = {b0_down, b1_down};
  r.validate();
  return r;
}

void RatingUpdateRule::validate() const {
  for (double v : {beta_up[0], beta_up[1], beta_down[0], beta_down[1]})
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("rating update probabilities must lie in [0,1]");
}

std::string RatingUpdateRule::str() const {
  std::ostringstream os;
  os << "(" << beta_up[1] << " " << beta_down[1] << " " << beta_up[0] << " " << beta_down[0] << ")";
  return os.str();
}

RatingDistribution RatingProfile::distribution() const {
  RatingDistribution s;
  for (int r : ratings) {
    if (r != 0 && r != 1) throw ValidationError("ratings must be 0 or 1");
    (r ? s.s1 : s.s0)++;
  }
  return s;
}

double partner_rating1_prob(int theta, const RatingDistribution& s) {
  const int n = s.n();
  return double(s.s1 - (theta == 1 ? 1 : 0)) / double(n - 1);
}

double stage_payoff(int theta, const RatingDistribution& s, const Plan& recommended, const Plan& own_plan,
                    const GameParams& params) {
  check_distribution(s, params.n_users);
  check_present(theta, s);
  const double p1 = partner_rating1_prob(theta, s);
  double served = 0.0, serving = 0.0;
  for (int other = 0; other < 2; ++other) {
    const double w = other ? p1 : 1.0 - p1;
    served += w * recommended.quality(theta, other);
    serving += w * own_plan.quality(other, theta);
  }
  return params.benefit * served - params.cost * serving;
}

double service_up_probability(int theta, int client_theta, const Plan& recommended, const Plan& own_plan,
                              const RatingUpdateRule& rule, double eps) {
  const int want = recommended.quality(client_theta, theta);
  const int act = own_plan.quality(client_theta, theta);
  const double bu = rule.beta_up[theta], bd = rule.beta_down[theta];
  if (want == 0) return bu;  // any report meets a zero recommendation
  const double p_high_report = act ? 1.0 - eps : eps;
  return p_high_report * bu + (1.0 - p_high_report) * (1.0 - bd);
}

double deviation_up_probability(int theta, const Plan& recommended, const Plan& own_plan, const RatingDistribution& s,
                                const RatingUpdateRule& rule, double eps) {
  check_present(theta, s);
  const double p1 = partner_rating1_prob(theta, s);
  double up = 0.0;
  if (p1 > 0.0) up += p1 * service_up_probability(theta, 1, recommended, own_plan, rule, eps);
  if (p1 < 1.0) up += (1.0 - p1) * service_up_probability(theta, 0, recommended, own_plan, rule, eps);
  return clamp_probability(up);
}

double compliance_up_probability(int theta, const Plan& plan, const RatingDistribution& s,
                                 const RatingUpdateRule& rule, double eps) {
  return deviation_up_probability(theta, plan, plan, s, rule, eps);
}

double x1_plus(const RatingUpdateRule& rule, double eps) {
  return (1.0 - eps) * rule.beta_up[1] + eps * (1.0 - rule.beta_down[1]);
}

double x0_plus(const RatingUpdateRule& rule, double eps) {
  return (1.0 - eps) * rule.beta_up[0] + eps * (1.0 - rule.beta_down[0]);
}

double x_fair(int s1, int n, const RatingUpdateRule& rule, double eps) {
  const double w1 = double(s1 - 1) / double(n - 1);
  const double w0 = double(n - s1) / double(n - 1);
  return ((1.0 - eps) * w1 + w0) * rule.beta_up[1] + eps * w1 * (1.0 - rule.beta_down[1]);
}

std::vector<double> binomial_pmf(int n, double p) {
  std::vector<double> out(n + 1, 0.0);
  if (n < 0) return {};
  if (p <= 0.0) {
    out[0] = 1.0;
    return out;
  }
  if (p >= 1.0) {
    out[n] = 1.0;
    return out;
  }
  const double lp = std::log(p), lq = std::log1p(-p);
  for (int k = 0; k <= n; ++k)
    out[k] = std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * lp + (n - k) * lq);
  return out;
}

std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

const std::vector<std::vector<int>>& derangements(int n) {
  static std::mutex mu;
  static std::map<int, std::vector<std::vector<int>>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  if (n < 2 || n > kExactMatchingLimit) throw ValidationError("derangement enumeration limited to 2..8 users");
  std::vector<std::vector<int>> out;
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  do {
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) ok = perm[i] != i;
    if (ok) out.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return cache.emplace(n, std::move(out)).first->second;
}

namespace {

// Joint law, over uniform derangements, of the focal user's client rating and the counts
// n[a][b] of non-focal users with rating a whose client has rating b.
struct PairCounts {
  int client_of_focal;
  std::array<std::array<int, 2>, 2> n;
  double prob;
};

const std::vector<PairCounts>& pair_count_law(int n, int s1, int focal_theta) {
  static std::mutex mu;
  static std::map<std::tuple<int, int, int>, std::vector<PairCounts>> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find({n, s1, focal_theta});
    if (it != cache.end()) return it->second;
  }
  const auto& ders = derangements(n);
  std::vector<int> rating(n, 0);
  rating[0] = focal_theta;
  int ones_left = s1 - focal_theta;
  for (int i = 1; i < n && ones_left > 0; ++i, --ones_left) rating[i] = 1;
  std::map<std::tuple<int, int, int, int, int>, double> hist;
  const double w = 1.0 / double(ders.size());
  for (const auto& m : ders) {
    std::array<std::array<int, 2>, 2> cnt{};
    for (int i = 1; i < n; ++i) cnt[rating[i]][rating[m[i]]]++;
    hist[{rating[m[0]], cnt[0][0], cnt[0][1], cnt[1][0], cnt[1][1]}] += w;
  }
  std::vector<PairCounts> law;
  for (const auto& [k, p] : hist) {
    PairCounts pc;
    pc.client_of_focal = std::get<0>(k);
    pc.n = {{{std::get<1>(k), std::get<2>(k)}, {std::get<3>(k), std::get<4>(k)}}};
    pc.prob = p;
    law.push_back(pc);
  }
  std::lock_guard<std::mutex> lock(mu);
  return cache.emplace(std::make_tuple(n, s1, focal_theta), std::move(law)).first->second;
}

bool plan_match_independent(const Plan& recommended, const Plan& played, const RatingUpdateRule& rule, double eps) {
  for (int theta = 0; theta < 2; ++theta)
    if (std::abs(service_up_probability(theta, 0, recommended, played, rule, eps) -
                 service_up_probability(theta, 1, recommended, played, rule, eps)) > 0.0)
      return false;
  return true;
}

std::vector<double> pad(std::vector<double> v, size_t len) {
  v.resize(len, 0.0);
  return v;
}

}  // namespace

std::vector<double> others_transition_played(const RatingDistribution& s, int theta, int client_theta,
                                             const Plan& recommended, const Plan& played, const RatingUpdateRule& rule,
                                             double eps, KernelMode mode, int exact_limit) {
  const int n = s.n();
  check_present(theta, s);
  const bool exact =
      mode == KernelMode::Exact && n <= exact_limit && !plan_match_independent(recommended, played, rule, eps);
  if (!exact) {
    const int o1 = s.s1 - theta, o0 = s.s0 - (1 - theta);
    const double p1 = o1 > 0 ? deviation_up_probability(1, recommended, played, s, rule, eps) : 0.0;
    const double p0 = o0 > 0 ? deviation_up_probability(0, recommended, played, s, rule, eps) : 0.0;
    return pad(convolve(binomial_pmf(o1, p1), binomial_pmf(o0, p0)), n);
  }
  const auto& law = pair_count_law(n, s.s1, theta);
  std::vector<double> out(n, 0.0);
  double total = 0.0;
  for (const auto& pc : law) {
    if (pc.client_of_focal != client_theta) continue;
    std::vector<double> acc{1.0};
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        if (pc.n[a][b] > 0)
          acc = convolve(acc, binomial_pmf(pc.n[a][b], service_up_probability(a, b, recommended, played, rule, eps)));
    for (size_t k = 0; k < acc.size() && k < out.size(); ++k) out[k] += pc.prob * acc[k];
    total += pc.prob;
  }
  if (total <= 0.0) throw ValidationError("focal client rating impossible for this distribution");
  for (double& v : out) v /= total;
  return out;
}

std::vector<double> others_transition(const RatingDistribution& s, int theta, int client_theta, const Plan& plan,
                                      const RatingUpdateRule& rule, double eps, KernelMode mode, int exact_limit) {
  return others_transition_played(s, theta, client_theta, plan, plan, rule, eps, mode, exact_limit);
}

std::vector<double> played_distribution_transition(const RatingDistribution& s, int theta, const Plan& recommended,
                                                   const Plan& played, const Plan& deviant_plan,
                                                   const RatingUpdateRule& rule, double eps, KernelMode mode,
                                                   int exact_limit) {
  const int n = s.n();
  check_present(theta, s);
  const double pc1 = partner_rating1_prob(theta, s);
  std::vector<double> out(n + 1, 0.0);
  for (int ct = 0; ct < 2; ++ct) {
    const double w = ct ? pc1 : 1.0 - pc1;
    if (w <= 0.0) continue;
    const double up = service_up_probability(theta, ct, recommended, deviant_plan, rule, eps);
    auto others = others_transition_played(s, theta, ct, recommended, played, rule, eps, mode, exact_limit);
    for (int k = 0; k < n; ++k) {
      out[k] += w * (1.0 - up) * others[k];
      out[k + 1] += w * up * others[k];
    }
  }
  return out;
}

std::vector<double> deviation_distribution_transition(const RatingDistribution& s, int theta, const Plan& plan,
                                                      const Plan& deviant_plan, const RatingUpdateRule& rule,
                                                      double eps, KernelMode mode, int exact_limit) {
  return played_distribution_transition(s, theta, plan, plan, deviant_plan, rule, eps, mode, exact_limit);
}

std::vector<double> distribution_transition(const RatingDistribution& s, const Plan& plan,
                                            const RatingUpdateRule& rule, double eps, KernelMode mode,
                                            int exact_limit) {
  const int n = s.n();
  if (!(plan == plans::ALTRUISTIC || plan == plans::FAIR || plan == plans::SELFISH))
    throw ValidationError("distribution_transition supports altruistic, fair and selfish plans only");
  if (n < 2) throw ValidationError("need at least two users");
  const bool exact = mode == KernelMode::Exact && n <= exact_limit && !plan_match_independent(plan, plan, rule, eps);
  if (!exact) {
    const double p1 = s.s1 > 0 ? compliance_up_probability(1, plan, s, rule, eps) : 0.0;
    const double p0 = s.s0 > 0 ? compliance_up_probability(0, plan, s, rule, eps) : 0.0;
    return pad(convolve(binomial_pmf(s.s1, p1), binomial_pmf(s.s0, p0)), n + 1);
  }
  const int theta = s.s1 > 0 ? 1 : 0;
  return deviation_distribution_transition(s, theta, plan, plan, rule, eps, mode, exact_limit);
}

}  // namespace rf
