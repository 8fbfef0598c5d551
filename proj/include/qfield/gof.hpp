#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace qfield {

struct EmpiricalDistribution {
  std::vector<double> sorted;
  double mean = 0.0;
  double variance = 0.0;

  std::size_t count() const { return sorted.size(); }
  static EmpiricalDistribution from_samples(std::vector<double> samples);
  /// P(sample <= x), right-continuous.
  double ecdf(double x) const;
};

/// N(0, sigma2) distribution function.
double normal_cdf(double x, double sigma2);

/// sup_x |ECDF - Phi_sigma| with the two-sided refinement at sample points.
double ks_statistic(const EmpiricalDistribution& dist, double sigma2);

/// 95% Dvoretzky-Kiefer-Wolfowitz band.
inline double dkw_band(std::size_t n);

struct GoFReport {
  double ks = 0.0;
  double dkw = 0.0;
  double sigma2 = 0.0;
  double lattice_gap = 0.0;
  double threshold = 0.0;  // max(0.03, 2 dkw + lattice gap)
  bool pass = false;
};

GoFReport gof_stats(const EmpiricalDistribution& dist, double sigma2, double lattice_gap = 0.0);

inline double dkw_band(std::size_t n) {
  return 1.3581 / std::sqrt(static_cast<double>(n));
}

}  // namespace qfield
