#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "rvbf/bfdr.hpp"
#include "rvbf/random.hpp"
#include "rvbf/special.hpp"

using namespace rvbf;

namespace {

// Independent oracle for posterior_v: substitute t = pi^(alpha+1) so the
// prior weight becomes uniform in t, then t = e^{-s} to resolve the spike at
// pi ~ 1; plain Simpson on s in [0, 60] with a fine grid.
double oracle_v(double log_bf, double alpha) {
  const int m = 1600000;
  const double hi = 80.0;
  const double h = hi / m;
  auto f = [&](double s) {
    const double log_pi = -s / (alpha + 1.0);
    const double log_1m_pi = std::log(-std::expm1(log_pi));
    const double q = log_pi - log_1m_pi - log_bf;
    double hv;
    if (q > 0.0) {
      const double e = std::exp(-q);
      hv = e / (1.0 + e);
    } else {
      hv = 1.0 / (1.0 + std::exp(q));
    }
    return hv * std::exp(-s);
  };
  double s = f(0.0) + f(hi);
  for (int i = 1; i < m; ++i) s += (i % 2 ? 4.0 : 2.0) * f(i * h);
  return s * h / 3.0;
}

}  // namespace

TEST_CASE("pi0 estimation") {
  SUBCASE("null self-consistency at the default gamma") {
    RandomSource rng(61);
    for (int df : {1, 3}) {
      std::vector<double> stats(10000);
      for (auto& t : stats) t = chi2_quantile(rng.uniform(), df);
      const Pi0Estimate est = estimate_pi0(stats, df, 0.999);
      CHECK(est.pi0_hat >= 0.95);
      CHECK(est.pi0_hat <= 1.0);
      CHECK_FALSE(est.implausible);
      CHECK(est.df == df);
      CHECK(est.gamma == 0.999);
    }
  }
  SUBCASE("default quantile value") {
    std::vector<double> stats(200, 1.0);
    const Pi0Estimate est = estimate_pi0(stats, 3, 0.999);
    CHECK(est.q_star == doctest::Approx(16.27).epsilon(1e-3));
    CHECK(est.pi0_hat == 1.0);  // capped: 200/(200*0.999) > 1
  }
  SUBCASE("everything above the quantile is flagged implausible") {
    std::vector<double> stats(200, 100.0);
    const Pi0Estimate est = estimate_pi0(stats, 1, 0.999);
    CHECK(est.pi0_hat == 0.0);
    CHECK(est.implausible);
  }
  SUBCASE("indicator formula on a hand-built vector") {
    // 150 below q*, 50 above, gamma = 0.75: pi0 = 150/(200*0.75) = 1 (capped)
    std::vector<double> stats;
    for (int i = 0; i < 150; ++i) stats.push_back(0.5);
    for (int i = 0; i < 50; ++i) stats.push_back(1e3);
    CHECK(estimate_pi0(stats, 1, 0.75).pi0_hat == 1.0);
    // gamma = 0.9: pi0 = 150/180 = 5/6
    CHECK(estimate_pi0(stats, 1, 0.9).pi0_hat == doctest::Approx(150.0 / 180.0).epsilon(1e-12));
  }
  SUBCASE("preconditions") {
    std::vector<double> small(99, 1.0), ok(100, 1.0);
    CHECK_THROWS_AS(estimate_pi0(small, 1, 0.999), std::domain_error);
    CHECK_NOTHROW(estimate_pi0(ok, 1, 0.999));
    CHECK_THROWS_AS(estimate_pi0(ok, 1, 0.5), std::domain_error);
    CHECK_THROWS_AS(estimate_pi0(ok, 1, 1.0), std::domain_error);
    CHECK_THROWS_AS(estimate_pi0(ok, 2, 0.999), std::domain_error);
  }
}

TEST_CASE("alpha from pi0") {
  CHECK(alpha_from_pi0(0.9) == doctest::Approx(9.0).epsilon(1e-12));
  CHECK(alpha_from_pi0(0.5) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(alpha_from_pi0(0.999) == doctest::Approx(999.0).epsilon(1e-9));
  CHECK(alpha_from_pi0(1.0) == kAlphaMax);
  CHECK(alpha_from_pi0(1.0 - 1e-12) == kAlphaMax);  // ratio exceeds the cap
  CHECK_THROWS_AS(alpha_from_pi0(0.0), std::domain_error);
  CHECK_THROWS_AS(alpha_from_pi0(-0.1), std::domain_error);
  CHECK_THROWS_AS(alpha_from_pi0(1.1), std::domain_error);
}

TEST_CASE("informative-prior alpha recalibration") {
  SUBCASE("uniform p-value grid") {
    std::vector<double> ps(10000);
    for (int i = 0; i < 10000; ++i) ps[i] = (i + 1.0) / 10000.0;
    const AlphaInf out = alpha_inf(9.0, ps, 0.998);
    CHECK(out.p0 == doctest::Approx(0.002).epsilon(1e-9));
    CHECK(out.alpha_inf_hat == doctest::Approx(9.0 / 0.002).epsilon(1e-9));
    CHECK_FALSE(out.clamped);
  }
  SUBCASE("degenerate all-ones distribution") {
    std::vector<double> ps(500, 1.0);
    const AlphaInf out = alpha_inf(3.0, ps, 0.7);
    CHECK(out.p0 == 1.0);
    CHECK(out.alpha_inf_hat == doctest::Approx(3.0).epsilon(1e-12));
  }
  SUBCASE("pi0_inf at one takes the minimum p-value") {
    std::vector<double> ps{0.4, 0.01, 0.9, 0.2};
    const AlphaInf out = alpha_inf(2.0, ps, 1.0);
    CHECK(out.p0 == 0.01);
    CHECK(out.alpha_inf_hat == doctest::Approx(200.0).epsilon(1e-12));
  }
  SUBCASE("zero quantile falls forward to the smallest positive value") {
    std::vector<double> ps{0.0, 0.0, 0.05, 0.3, 0.8};
    const AlphaInf out = alpha_inf(1.0, ps, 1.0);
    CHECK(out.clamped);
    CHECK(out.p0 == 0.05);
  }
  SUBCASE("preconditions") {
    std::vector<double> ps{0.5};
    CHECK_THROWS_AS(alpha_inf(1.0, {}, 0.9), std::domain_error);
    CHECK_THROWS_AS(alpha_inf(1.0, ps, 0.0), std::domain_error);
    CHECK_THROWS_AS(alpha_inf(1.0, ps, 1.5), std::domain_error);
  }
}

TEST_CASE("posterior association probability") {
  SUBCASE("unit Bayes factor has the closed form 1/(alpha+2)") {
    for (double alpha : {1.0, 4.0, 10.0, 100.0, 1e3, 1e5})
      CHECK(posterior_v(0.0, alpha) == doctest::Approx(1.0 / (alpha + 2.0)).epsilon(1e-10));
  }
  SUBCASE("matches a dense quadrature oracle") {
    for (double log_bf : {-5.0, -1.0, 0.0, 1.0, 3.0, 8.0})
      for (double alpha : {1.0, 9.0, 999.0, 1e5})
        CHECK(std::abs(posterior_v(log_bf, alpha) - oracle_v(log_bf, alpha)) <= 1e-8);
  }
  SUBCASE("saturation limits") {
    CHECK(posterior_v(1e6, 5.0) > 1.0 - 1e-6);
    CHECK(posterior_v(-1e6, 5.0) < 1e-6);
    const double inf = std::numeric_limits<double>::infinity();
    CHECK(posterior_v(inf, 5.0) == 1.0);
    CHECK(posterior_v(-inf, 5.0) == 0.0);
    // alpha at the cap concentrates the prior at pi0 = 1, killing any fixed BF
    CHECK(posterior_v(3.0, 1e6) < 1e-4);
  }
  SUBCASE("strictly increasing in the Bayes factor") {
    for (double alpha : {1.0, 10.0, 100.0}) {
      double prev = -1.0;
      for (double log_bf = -6.0; log_bf <= 6.0; log_bf += 0.5) {
        const double v = posterior_v(log_bf, alpha);
        CHECK(v > prev);
        prev = v;
      }
    }
  }
  SUBCASE("strictly decreasing in alpha") {
    for (double log_bf : {0.0, 2.0}) {
      double prev = 2.0;
      for (double alpha : {0.5, 1.0, 2.0, 5.0, 20.0, 100.0, 1e3, 1e5}) {
        const double v = posterior_v(log_bf, alpha);
        CHECK(v < prev);
        prev = v;
      }
    }
  }
  SUBCASE("alpha must be positive and finite") {
    CHECK_THROWS_AS(posterior_v(0.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(posterior_v(0.0, -1.0), std::domain_error);
    CHECK_THROWS_AS(posterior_v(0.0, std::numeric_limits<double>::infinity()),
                    std::domain_error);
  }
}

TEST_CASE("threshold selection") {
  SUBCASE("hand-evaluated three-gene example") {
    const ThresholdResult res = select_threshold({0.99, 0.90, 0.50}, 0.05);
    CHECK(res.n_discoveries == 1);
    CHECK(res.attained_bfdr == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(res.threshold == doctest::Approx(0.945).epsilon(1e-12));
  }
  SUBCASE("all certain discoveries") {
    const ThresholdResult res = select_threshold(std::vector<double>(5, 1.0), 0.05);
    CHECK(res.n_discoveries == 5);
    CHECK(res.attained_bfdr == 0.0);
    CHECK(res.threshold < 1.0);
  }
  SUBCASE("all certain nulls") {
    const ThresholdResult res = select_threshold(std::vector<double>(5, 0.0), 0.05);
    CHECK(res.n_discoveries == 0);
    CHECK(res.attained_bfdr == 0.0);
    CHECK(res.threshold == 1.0);
  }
  SUBCASE("ties cannot be split") {
    // prefix of one is fine (0.01), prefix of three averages exactly 0.05
    ThresholdResult res = select_threshold({0.99, 0.93, 0.93}, 0.05);
    CHECK(res.n_discoveries == 3);
    CHECK(res.attained_bfdr == doctest::Approx(0.05).epsilon(1e-12));
    // a tighter level cannot stop inside the tie, so only the top gene stays
    res = select_threshold({0.99, 0.93, 0.93}, 0.04);
    CHECK(res.n_discoveries == 1);
    CHECK(res.attained_bfdr == doctest::Approx(0.01).epsilon(1e-12));
  }
  SUBCASE("largest qualifying prefix wins even past a local excursion") {
    // prefix 1: 0.02; prefix 3 (tie): 0.0333...; prefix 4: 0.225 > 0.05
    const ThresholdResult res = select_threshold({0.98, 0.96, 0.96, 0.2}, 0.05);
    CHECK(res.n_discoveries == 3);
    CHECK(res.attained_bfdr == doctest::Approx(0.1 / 3.0).epsilon(1e-12));
    CHECK(res.threshold == doctest::Approx(0.58).epsilon(1e-12));
  }
  SUBCASE("discoveries are upward-closed and control is attained") {
    RandomSource rng(62);
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<double> v(200);
      for (auto& x : v) {
        const double u = rng.uniform();
        x = u < 0.1 ? 1.0 - 0.01 * rng.uniform() : rng.uniform();
      }
      const ThresholdResult res = select_threshold(v, 0.05);
      std::vector<double> sorted = v;
      std::sort(sorted.begin(), sorted.end(), std::greater<>());
      int above = 0;
      double mean_null = 0.0;
      for (double x : sorted)
        if (x > res.threshold) ++above;
      CHECK(above == res.n_discoveries);
      if (res.n_discoveries > 0) {
        for (int i = 0; i < res.n_discoveries; ++i) mean_null += 1.0 - sorted[i];
        mean_null /= res.n_discoveries;
        CHECK(res.attained_bfdr == doctest::Approx(mean_null).epsilon(1e-12));
        CHECK(res.attained_bfdr <= 0.05);
      }
    }
  }
  SUBCASE("preconditions") {
    CHECK_THROWS_AS(select_threshold({}, 0.05), std::domain_error);
    CHECK_THROWS_AS(select_threshold({0.5}, 0.0), std::domain_error);
    CHECK_THROWS_AS(select_threshold({0.5}, 1.0), std::domain_error);
  }
}
