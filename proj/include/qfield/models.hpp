#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "qfield/innovations.hpp"
#include "qfield/lattice.hpp"

namespace qfield {

/// Finite causal kernel: offsets j >= 0 coordinatewise, X_k reads xi_{k-j}.
struct Kernel {
  std::map<IndexVec, double> coeffs;

  void validate(std::size_t dim) const;
  double sum_sq() const;
  double sum() const;
};

/// Finite Volterra coefficient table a_{u,v} with vanishing diagonal.
struct VolterraCoeffs {
  std::map<std::pair<IndexVec, IndexVec>, double> coeffs;

  void validate(std::size_t dim) const;
};

struct IidSpec {};

struct LinearSpec {
  Kernel kernel;
};

struct VolterraSpec {
  VolterraCoeffs coeffs;
};

/// X_k = xi_k * sqrt(U_{k-(1,...,1)}) with a bounded two-level U driven by the
/// innovation one diagonal step into the past: U = u_low when xi < 0, else u_high.
struct ProductOmdSpec {
  double u_low = 1.0;
  double u_high = 4.0;
};

/// Heavy-tailed variant: U_{c} = sum_{n=2}^{n_max} (n/ln^2 n) 1(G^(n)_c) with
/// independent per-site level events G^(n)_c of probability 1/(2 n^2), drawn from
/// a dedicated stream that shares the quenched frozen-past convention.
struct UFieldSpec {
  long long n_max = 1000;
};

struct FieldModel;

/// X = m + (1-T)m' + (1-S)m'' + (1-T)(1-S)Y, T and S shifting the first and
/// second index by +1. Null components mean zero.
struct CoboundarySpec {
  std::shared_ptr<const FieldModel> m;
  std::shared_ptr<const FieldModel> m_prime;   // martingale difference in the second coordinate
  std::shared_ptr<const FieldModel> m_dprime;  // martingale difference in the first coordinate
  std::shared_ptr<const FieldModel> y;
};

using ModelVariant =
    std::variant<IidSpec, LinearSpec, VolterraSpec, ProductOmdSpec, UFieldSpec, CoboundarySpec>;

struct FieldModel {
  std::size_t dim = 2;
  InnovationSpec innovation;
  ModelVariant variant = IidSpec{};

  void validate() const;
  bool is_coboundary() const { return std::holds_alternative<CoboundarySpec>(variant); }
};

/// Relative cells X_k reads (cell = k + r). All r <= 0 except for the forward
/// shifts of a coboundary composite.
std::vector<IndexVec> footprint_cells(const FieldModel& model);

/// Bounding box of the footprint as a half-open Rect of relative cells.
Rect footprint_bounds(const FieldModel& model);

/// Innovation window needed to evaluate the field on `field_window`.
Rect required_window(const FieldModel& model, const Rect& field_window);

/// Structural causality/OMD classification (never assumed for composites).
bool is_structural_omd(const FieldModel& model);

double eval_field(const FieldModel& model, const InnovationLattice& lattice, const IndexVec& k);

NdArray field_window(const FieldModel& model, const InnovationLattice& lattice,
                     const Rect& window);

/// Known bound on |X| for bounded models; nullopt when unbounded.
std::optional<double> field_bound(const FieldModel& model);

// --- coefficient/condition machinery -----------------------------------------

/// b_{n,i} = sum_{0<=k<=n-1} a_{k+i}; keys omitted when the value is zero.
std::map<IndexVec, double> lin_b_coeffs(const Kernel& kernel, const IndexVec& n);

struct SupCheck {
  double sup = 0.0;
  IndexVec argmax;            // box index attaining the sup
  Index stabilized_at = 0;    // first diagonal n where the value stops changing
  double stabilized_value = 0.0;
};

/// sup over n in [1, N_max]^d of sum_i b_{n,i}^2.
SupCheck check_lin(const Kernel& kernel, std::size_t dim, Index n_max);

/// c_{u,v}(j) = sum_{0<=k<=j-1} a_{k+u,k+v}; the diagonal stays zero.
std::map<std::pair<IndexVec, IndexVec>, double> volterra_c_coeffs(const VolterraCoeffs& coeffs,
                                                                  const IndexVec& j);

/// sup over j in [1, N_max]^d of sum_{u != v} c_{u,v}(j)^2.
SupCheck check_volt(const VolterraCoeffs& coeffs, std::size_t dim, Index n_max);

// --- moment functionals and the heavy-level series ----------------------------

struct MomentFunctional {
  enum class Kind { kGEps, kPhiD, kPlain } kind = Kind::kPlain;
  double eps = 0.5;  // g_eps(x) = x ln^{1-eps}(1+x); eps = 0 gives x ln(1+x)
  int d = 2;         // phi_d(x) = x^2 ln^{d-1}(1+|x|)

  static MomentFunctional g_eps(double eps);
  static MomentFunctional x_log1p() { return g_eps(0.0); }
  static MomentFunctional phi_d(int d);
  static MomentFunctional plain();

  double operator()(double x) const;
};

inline double u_level_value(long long n) {  // n / ln^2 n
  const double ln = std::log(static_cast<double>(n));
  return static_cast<double>(n) / (ln * ln);
}
inline double u_level_prob(long long n) { return 0.5 / (static_cast<double>(n) * static_cast<double>(n)); }

/// E U for the surrogate with levels 2..n_max.
double u_mean(long long n_max);

/// Analytic term-summation series sum_{n=2}^{N} P(level n) * f(level value),
/// reported at the given checkpoints (ascending).
std::vector<std::pair<long long, double>> u_moment_series(long long n_max,
                                                          const MomentFunctional& f,
                                                          std::vector<long long> checkpoints = {});

///// Expected number of level fires at or above threshold t: sum of 1/(2n^2) over
/// all n >= 2 with level value >= t, summed to infinity (trigamma tail).
double u_tail_sum(double t);

/// Exact P(U >= some level fire above t) with levels capped at n_max.
double u_tail_prob_capped(double t, long long n_max);

/// Realized U at a cell (levels 2..n_max from the lattice's level streams).
double u_field_value(const InnovationLattice& lattice, const IndexVec& cell, long long n_max);

}  // namespace qfield
