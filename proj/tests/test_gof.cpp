#include <cmath>
#include <random>

#include "doctest.h"
#include "qfield/gof.hpp"

using namespace qfield;

TEST_CASE("normal_cdf reference values") {
  CHECK(normal_cdf(0.0, 1.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(normal_cdf(1.96, 1.0) == doctest::Approx(0.9750021048517795).epsilon(1e-12));
  CHECK(normal_cdf(-1.96, 1.0) == doctest::Approx(1.0 - 0.9750021048517795).epsilon(1e-12));
  // variance scaling: Phi_{sigma2=4}(2) = Phi_1(1)
  CHECK(normal_cdf(2.0, 4.0) == doctest::Approx(normal_cdf(1.0, 1.0)).epsilon(1e-15));
}

TEST_CASE("empirical distribution basics") {
  auto d = EmpiricalDistribution::from_samples({3.0, -1.0, 1.0, 1.0});
  CHECK(d.count() == 4);
  CHECK(d.mean == doctest::Approx(1.0));
  CHECK(d.variance == doctest::Approx((4.0 + 4.0 + 0.0 + 0.0) / 3.0));  // sample variance
  CHECK(d.ecdf(-1.0) == doctest::Approx(0.25));
  CHECK(d.ecdf(0.999) == doctest::Approx(0.25));
  CHECK(d.ecdf(1.0) == doctest::Approx(0.75));
  CHECK(d.ecdf(10.0) == doctest::Approx(1.0));
  CHECK(d.ecdf(-10.0) == 0.0);
}

TEST_CASE("ks statistic: hand-computed point masses") {
  // single sample at 0: ECDF jumps 0 -> 1 at 0, Phi(0) = 0.5, KS = 0.5
  auto one = EmpiricalDistribution::from_samples({0.0});
  CHECK(ks_statistic(one, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
  // samples {-1, 1}: sup is at x = -1 from the left: Phi(-1) - 0 = 0.158655...
  // and at x = -1 from the right: 0.5 - Phi(-1) = 0.341345 -> the KS value.
  auto two = EmpiricalDistribution::from_samples({-1.0, 1.0});
  const double phi_m1 = normal_cdf(-1.0, 1.0);
  CHECK(ks_statistic(two, 1.0) == doctest::Approx(0.5 - phi_m1).epsilon(1e-12));
}

TEST_CASE("dkw band value") {
  CHECK(dkw_band(10000) == doctest::Approx(0.013581).epsilon(1e-12));
  CHECK(dkw_band(100) == doctest::Approx(0.13581).epsilon(1e-12));
}

TEST_CASE("gof verdict thresholds") {
  // large gaussian sample should pass against the true variance
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> nd(0.0, 2.0);
  std::vector<double> xs(20000);
  for (auto& x : xs) x = nd(rng);
  auto d = EmpiricalDistribution::from_samples(std::move(xs));
  auto rep = gof_stats(d, 4.0);
  CHECK(rep.threshold == doctest::Approx(0.03));  // 2 dkw = 0.0192 < 0.03 floor
  CHECK(rep.pass);
  CHECK(rep.ks <= rep.dkw * 2.0);  // generous for a true-model draw

  // wrong variance must fail decisively
  auto bad = gof_stats(d, 1.0);
  CHECK_FALSE(bad.pass);
  CHECK(bad.ks > 0.1);

  // lattice gap widens the threshold
  auto wide = gof_stats(d, 4.0, 0.05);
  CHECK(wide.threshold == doctest::Approx(2.0 * dkw_band(20000) + 0.05));
}
