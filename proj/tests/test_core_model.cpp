#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "rating_forge/core_model.hpp"

using namespace rf;

namespace {
oracle::Table tab(const Plan& p) { return p.table; }
oracle::Rule orule(const RatingUpdateRule& r) { return {{r.beta_up[0], r.beta_up[1]}, {r.beta_down[0], r.beta_down[1]}}; }
GameParams base5() {
  GameParams p;
  p.n_users = 5;
  p.benefit = 3;
  p.cost = 1;
  p.report_error = 0.1;
  p.discount = 0.99;
  return p;
}
}  // namespace

TEST_CASE("game parameter validation") {
  GameParams p = base5();
  CHECK_NOTHROW(p.validate());
  p.report_error = 0.5;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = base5();
  p.cost = 3.5;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = base5();
  p.n_users = 2;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = base5();
  p.n_users = 3;
  p.cost = 1.6;  // (1/2)*3 - 1.6 < 0
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = base5();
  p.discount = 1.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
}

TEST_CASE("plans: sixteen distinct tables and named members") {
  std::vector<int> ids;
  for (int id = 0; id < 16; ++id) {
    CHECK(Plan::from_id(id).id() == id);
    ids.push_back(Plan::from_id(id).id());
  }
  CHECK(plans::FAIR.quality(0, 1) == 0);
  CHECK(plans::FAIR.quality(1, 0) == 1);
  CHECK(plans::FAIR.quality(0, 0) == 1);
  CHECK(plans::DEV0.quality(0, 1) == 0);
  CHECK(plans::DEV0.quality(1, 0) == 1);
  CHECK(plans::DEV1.quality(1, 1) == 0);
  CHECK(plans::DEV01 == plans::SELFISH);
  CHECK(Plan::parse("fair") == plans::FAIR);
  CHECK(Plan::parse(plans::DEV1.name()) == plans::DEV1);
}

TEST_CASE("stage payoff examples") {
  GameParams p = base5();
  for (int s1 = 1; s1 <= 5; ++s1)
    CHECK(stage_payoff(1, {5 - s1, s1}, plans::ALTRUISTIC, plans::ALTRUISTIC, p) == doctest::Approx(2.0));
  CHECK(stage_payoff(0, {2, 3}, plans::FAIR, plans::FAIR, p) == doctest::Approx(-0.25));
  for (int s1 = 0; s1 <= 5; ++s1)
    for (int th = 0; th < 2; ++th)
      if ((th ? s1 : 5 - s1) > 0) CHECK(stage_payoff(th, {5 - s1, s1}, plans::SELFISH, plans::SELFISH, p) == 0.0);
  CHECK_THROWS_AS(stage_payoff(1, {5, 0}, plans::FAIR, plans::FAIR, p), ValidationError);
  CHECK_THROWS_AS(stage_payoff(1, {2, 2}, plans::FAIR, plans::FAIR, p), ValidationError);
}

TEST_CASE("stage payoff agrees with direct averaging for every plan pair") {
  GameParams p = base5();
  for (int a = 0; a < 16; ++a)
    for (int o = 0; o < 16; ++o)
      for (int s1 = 0; s1 <= 5; ++s1)
        for (int th = 0; th < 2; ++th) {
          if ((th ? s1 : 5 - s1) == 0) continue;
          const double want = oracle::payoff(th, s1, 5, tab(Plan::from_id(a)), tab(Plan::from_id(o)), 3, 1);
          CHECK(stage_payoff(th, {5 - s1, s1}, Plan::from_id(a), Plan::from_id(o), p) == doctest::Approx(want));
        }
}

TEST_CASE("fair plan ordering of payoffs") {
  GameParams p = base5();
  for (int s1 = 1; s1 <= 4; ++s1) {
    const RatingDistribution s{5 - s1, s1};
    const double hi = stage_payoff(1, s, plans::FAIR, plans::FAIR, p);
    const double lo = stage_payoff(0, s, plans::FAIR, plans::FAIR, p);
    CHECK(hi > 2.0 - 1e-12);
    CHECK(lo < 2.0 + 1e-12);
  }
}

TEST_CASE("compliance probabilities") {
  const auto r = RatingUpdateRule::make(0.8, 0.9, 0.6, 0.8);
  CHECK(compliance_up_probability(1, plans::ALTRUISTIC, {2, 3}, r, 0.1) == doctest::Approx(0.73));
  CHECK(x1_plus(r, 0.1) == doctest::Approx(0.73));
  CHECK(compliance_up_probability(1, plans::FAIR, {0, 5}, r, 0.1) == doctest::Approx(x1_plus(r, 0.1)));
  CHECK(compliance_up_probability(0, plans::SELFISH, {3, 2}, r, 0.1) == doctest::Approx(0.6));
  CHECK(compliance_up_probability(0, plans::FAIR, {3, 2}, r, 0.1) == doctest::Approx(x0_plus(r, 0.1)));
  for (int s1 = 1; s1 <= 5; ++s1)
    CHECK(compliance_up_probability(1, plans::FAIR, {5 - s1, s1}, r, 0.1) == doctest::Approx(x_fair(s1, 5, r, 0.1)));
}

TEST_CASE("deviation probabilities") {
  const auto r = RatingUpdateRule::make(0.8, 0.9, 0.6, 0.8);
  const double eps = 0.1;
  CHECK(deviation_up_probability(1, plans::ALTRUISTIC, plans::DEV0, {2, 3}, r, eps) == doctest::Approx(0.45));
  for (int s1 = 1; s1 <= 5; ++s1)
    CHECK(deviation_up_probability(1, plans::ALTRUISTIC, plans::SELFISH, {5 - s1, s1}, r, eps) ==
          doctest::Approx(0.9 * 0.1 + 0.1 * 0.8));
  for (int a = 0; a < 16; ++a) {
    const Plan pl = Plan::from_id(a);
    CHECK(deviation_up_probability(1, pl, pl, {2, 3}, r, eps) ==
          doctest::Approx(compliance_up_probability(1, pl, {2, 3}, r, eps)));
  }
}

TEST_CASE("probabilities stay in the unit interval") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int k = 0; k < 500; ++k) {
    const auto r = RatingUpdateRule::make(u(rng), u(rng), u(rng), u(rng));
    const double eps = 0.49 * u(rng);
    const int s1 = int(u(rng) * 6) % 6;
    const RatingDistribution s{5 - s1, s1};
    for (int th = 0; th < 2; ++th) {
      if (s.count(th) == 0) continue;
      for (int a = 0; a < 16; ++a) {
        const double c = compliance_up_probability(th, Plan::from_id(a), s, r, eps);
        const double d = deviation_up_probability(th, plans::FAIR, Plan::from_id(a), s, r, eps);
        CHECK(c >= 0.0);
        CHECK(c <= 1.0);
        CHECK(d >= 0.0);
        CHECK(d <= 1.0);
      }
    }
  }
}

TEST_CASE("fair retention beats altruistic retention under the three conditions") {
  // conditions hold for this rule at N=5 (checked in the design tests)
  const auto r = RatingUpdateRule::make(0.95, 0.3, 0.6, 0.8);
  for (int s1 = 1; s1 <= 5; ++s1) CHECK(x_fair(s1, 5, r, 0.1) >= x1_plus(r, 0.1) - 1e-15);
}

TEST_CASE("distribution kernel examples") {
  const auto r = RatingUpdateRule::make(0.95, 0.3, 0.6, 0.8);
  const double eps = 0.1;
  auto law = distribution_transition({1, 2}, plans::ALTRUISTIC, r, eps);
  const double x1 = x1_plus(r, eps), x0 = x0_plus(r, eps);
  CHECK(law[3] == doctest::Approx(x1 * x1 * x0));
  const auto det = RatingUpdateRule::make(1, 0, 1, 0);
  for (int s1 = 0; s1 <= 6; ++s1) {
    auto l = distribution_transition({6 - s1, s1}, plans::ALTRUISTIC, det, 0.0);
    CHECK(l[6] == doctest::Approx(1.0));
  }
  CHECK_THROWS_AS(distribution_transition({2, 3}, plans::DEV0, r, eps), ValidationError);
}

TEST_CASE("kernels match brute force over matchings and outcomes") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 6; ++trial) {
    const auto r = RatingUpdateRule::make(u(rng), u(rng), u(rng), u(rng));
    const double eps = 0.4 * u(rng);
    for (int n : {3, 4, 5}) {
      for (int s1 = 0; s1 <= n; ++s1) {
        const RatingDistribution s{n - s1, s1};
        const auto prof = oracle::profile(n, s1);
        for (const Plan& pl : {plans::ALTRUISTIC, plans::FAIR, plans::SELFISH}) {
          const auto got = distribution_transition(s, pl, r, eps, KernelMode::Exact);
          const auto want = oracle::next_count_law(prof, tab(pl), std::vector<oracle::Table>(n, tab(pl)), orule(r), eps);
          double sum = 0.0;
          for (int k = 0; k <= n; ++k) {
            CHECK(got[k] == doctest::Approx(want[k]).epsilon(1e-10));
            sum += got[k];
          }
          CHECK(std::abs(sum - 1.0) < 1e-12);
        }
        // one deviating user (the last one, which has rating 1 if any)
        for (int th = 0; th < 2; ++th) {
          if (s.count(th) == 0) continue;
          auto prof2 = prof;
          int who = -1;
          for (int i = 0; i < n; ++i)
            if (prof2[i] == th) who = i;
          for (int d = 0; d < 16; ++d) {
            std::vector<oracle::Table> acts(n, tab(plans::FAIR));
            acts[who] = tab(Plan::from_id(d));
            const auto want = oracle::next_count_law(prof2, tab(plans::FAIR), acts, orule(r), eps);
            const auto got = deviation_distribution_transition(s, th, plans::FAIR, Plan::from_id(d), r, eps,
                                                               KernelMode::Exact);
            for (int k = 0; k <= n; ++k) CHECK(got[k] == doctest::Approx(want[k]).epsilon(1e-10));
          }
        }
      }
    }
  }
}

TEST_CASE("recommended and played plans may differ") {
  const auto r = RatingUpdateRule::make(0.9, 0.6, 0.7, 0.8);
  const double eps = 0.15;
  const int n = 5;
  for (int s1 = 1; s1 <= 4; ++s1) {
    const auto prof = oracle::profile(n, s1);
    for (int rec = 0; rec < 16; ++rec) {
      std::vector<oracle::Table> acts(n, tab(plans::ALTRUISTIC));
      acts[n - 1] = tab(plans::DEV0);
      const auto want = oracle::next_count_law(prof, tab(Plan::from_id(rec)), acts, orule(r), eps);
      const auto got = played_distribution_transition({n - s1, s1}, 1, Plan::from_id(rec), plans::ALTRUISTIC,
                                                      plans::DEV0, r, eps, KernelMode::Exact);
      for (int k = 0; k <= n; ++k) CHECK(got[k] == doctest::Approx(want[k]).epsilon(1e-10));
    }
  }
}

TEST_CASE("independent kernel matches exact when service is match independent") {
  const auto r = RatingUpdateRule::make(0.95, 0.3, 0.6, 0.8);
  for (int s1 = 0; s1 <= 6; ++s1) {
    const auto a = distribution_transition({6 - s1, s1}, plans::ALTRUISTIC, r, 0.1, KernelMode::Exact);
    const auto b = distribution_transition({6 - s1, s1}, plans::ALTRUISTIC, r, 0.1, KernelMode::Independent);
    for (size_t k = 0; k < a.size(); ++k) CHECK(a[k] == doctest::Approx(b[k]));
  }
}

TEST_CASE("report channel") {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 1000; ++k) CHECK(sample_report(1, 0.0, rng) == 1);
  const int draws = 1000000;
  int flips = 0;
  for (int k = 0; k < draws; ++k) flips += sample_report(0, 0.1, rng);
  const double sd = std::sqrt(0.1 * 0.9 * draws);
  CHECK(std::abs(flips - 0.1 * draws) < 3 * sd);
}

TEST_CASE("derangement counts") {
  CHECK(derangements(2).size() == 1);
  CHECK(derangements(3).size() == 2);
  CHECK(derangements(5).size() == 44);
  CHECK(derangements(8).size() == 14833);
  CHECK_THROWS_AS(derangements(9), ValidationError);
}
