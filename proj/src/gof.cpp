#include "qfield/gof.hpp"

#include <algorithm>
#include <stdexcept>

namespace qfield {

EmpiricalDistribution EmpiricalDistribution::from_samples(std::vector<double> samples) {
  if (samples.empty()) throw std::invalid_argument("empirical distribution: empty sample");
  EmpiricalDistribution d;
  d.sorted = std::move(samples);
  std::sort(d.sorted.begin(), d.sorted.end());
  double s = 0.0;
  for (double x : d.sorted) s += x;
  const double n = static_cast<double>(d.sorted.size());
  d.mean = s / n;
  double ss = 0.0;
  for (double x : d.sorted) ss += (x - d.mean) * (x - d.mean);
  d.variance = d.sorted.size() > 1 ? ss / (n - 1.0) : 0.0;
  return d;
}

double EmpiricalDistribution::ecdf(double x) const {
  const auto it = std::upper_bound(sorted.begin(), sorted.end(), x);
  return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
}

double normal_cdf(double x, double sigma2) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("normal_cdf: sigma2 must be > 0");
  return 0.5 * std::erfc(-x / std::sqrt(2.0 * sigma2));
}

double ks_statistic(const EmpiricalDistribution& dist, double sigma2) {
  const std::size_t n = dist.count();
  if (n == 0) throw std::invalid_argument("ks_statistic: empty sample");
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double phi = normal_cdf(dist.sorted[i], sigma2);
    d = std::max(d, phi - static_cast<double>(i) / static_cast<double>(n));
    d = std::max(d, static_cast<double>(i + 1) / static_cast<double>(n) - phi);
  }
  return d;
}

GoFReport gof_stats(const EmpiricalDistribution& dist, double sigma2, double lattice_gap) {
  GoFReport r;
  r.sigma2 = sigma2;
  r.dkw = dkw_band(dist.count());
  r.lattice_gap = lattice_gap;
  r.ks = ks_statistic(dist, sigma2);
  r.threshold = std::max(0.03, 2.0 * r.dkw + lattice_gap);
  r.pass = r.ks <= r.threshold;
  return r;
}

}  // namespace qfield
