#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qfield/gof.hpp"
#include "qfield/models.hpp"

namespace qfield {

enum class Regime { kDiagonal, kRectangular };

struct ExperimentSpec {
  FieldModel model;
  Regime regime = Regime::kDiagonal;
  std::vector<IndexVec> sizes;              // strictly increasing by volume
  std::size_t replicates = 10000;
  std::vector<std::uint64_t> frozen_seeds;  // empty = annealed
  std::uint64_t base_seed = 1;
  int threads = 0;  // <= 0: QFIELD_THREADS env var, else hardware concurrency
  // quenched runs insist on a structural orthomartingale difference unless the
  // caller explicitly takes responsibility
  bool acknowledge_non_omd = false;

  void validate(bool needs_gof = true) const;
};

struct Sigma2Estimate {
  double value = 0.0;
  std::string method;  // "exact" or "mc"
  double error = 0.0;  // SE on the mc path, 0 exactly
};

/// E(X_{0,0}^2); exact per-variant formula or enumeration where available.
Sigma2Estimate estimate_sigma2(const FieldModel& model, std::size_t mc_reps = 1 << 14,
                               std::uint64_t seed = 7);

/// KS contribution of the value lattice of S/sqrt(vol): atom spacing over the
/// normal density height; 0 when the sum's support is not a known lattice.
double lattice_gap(const FieldModel& model, const IndexVec& size);

struct CLTCell {
  std::optional<std::uint64_t> frozen_seed;  // nullopt on the annealed path
  IndexVec size;
  EmpiricalDistribution dist;
  GoFReport gof;
};

struct CLTResult {
  std::vector<CLTCell> cells;
  Sigma2Estimate sigma2;
  double runtime_seconds = 0.0;
  bool all_pass = true;
};

/// Quenched: one run per (frozen past, size); innovations on {w <= 0} pinned.
CLTResult run_quenched_clt(const ExperimentSpec& spec);
/// Annealed: everything resampled per replicate.
CLTResult run_annealed_clt(const ExperimentSpec& spec);

/// Exact rational in [0,1]; partitions with irrational ends are rejected.
struct UnitRational {
  long num = 0;
  long den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  void validate() const;
};

struct FddSpec {
  std::vector<UnitRational> t_partition;  // ascending, first > 0, last = 1
  std::vector<UnitRational> s_partition;
  std::vector<std::vector<double>> coeffs;  // a_{k,l}, sized |t| x |s|
};

struct FunctionalReport {
  std::vector<std::pair<double, double>> grid;  // partition corner points (t,s)
  std::vector<std::vector<double>> emp_cov;     // empirical Cov(W(p), W(p'))
  std::vector<std::vector<double>> sheet_cov;   // sigma2 min(t,t') min(s,s')
  double max_cov_rel_err = 0.0;
  double fdd_variance = 0.0;  // empirical variance of the linear combination
  double gamma = 0.0;         // sigma2 sum a^2 dt ds
  double fdd_rel_err = 0.0;
  double sigma2 = 0.0;
  bool pass = false;
};

FunctionalReport run_functional_fdd(const ExperimentSpec& spec, const FddSpec& fdd,
                                    double rel_tol = 0.05);

struct TightnessEntry {
  Rect a, b;
  double ratio4_a = 0.0;   // E D^4(A) / mu^2(A)
  double ratio4_b = 0.0;
  double cross_ratio = 0.0;  // E(D^2(A) D^2(B)) / (mu(A) mu(B))
};

struct TightnessReport {
  std::vector<TightnessEntry> entries;
  double max_ratio = 0.0;
  double bound_c = 0.0;  // |X| <= C
};

/// Bickel-Wichura style increment-moment probe on lattice rectangles inside
/// the sampling box; requires a bounded model.
TightnessReport tightness_moment_probe(const ExperimentSpec& spec,
                                       const std::vector<std::pair<Rect, Rect>>& rect_pairs);

struct GhEntry {
  IndexVec size;
  double q = 0.0;
  double limit_stat = 0.0;  // (1/n) E_0 |sum_{i<=[(n-1)q]} (F^2 - sigma2)|
  double limit_se = 0.0;
  double max_stat = 0.0;    // (1/n) E_0 max_{i<n} F^2
  double max_se = 0.0;
};

struct GhReport {
  std::vector<GhEntry> entries;
  bool limit_decreasing = true;  // per q, along the size ladder
  double sigma2 = 0.0;
};

GhReport gh_check(const ExperimentSpec& spec, const std::vector<double>& qs);

struct CoboundaryEntry {
  IndexVec size;
  double median = 0.0;  // of per-replicate max |S - M| / sqrt(nv)
  double p90 = 0.0;
  double max = 0.0;
  double r1_max = 0.0;
  double r2_max = 0.0;
  double r3_max = 0.0;
  double r3_bound = 0.0;        // 4 max|Y| / sqrt(nv), from the field bound
  bool r3_within_bound = true;  // checked at every replicate
};

struct CoboundaryReport {
  std::vector<CoboundaryEntry> entries;
  std::vector<double> decay_ratios;  // median[i] / median[i+1]
};

CoboundaryReport coboundary_residuals(const ExperimentSpec& spec);

struct CounterexampleEntry {
  long long window_n = 0;  // window [ceil(ln N), N)^2
  double budget = 0.0;     // exceedance threshold B on U / (i j)
  double expected_count = 0.0;     // analytic sum of per-cell tail masses
  double prob_exceed = 0.0;        // 1 - prod over levels (1-p)^{qualifying cells}
  double control_expected = 0.0;   // bounded-U control model (always 0 beyond trivia)
};

struct CounterexampleCellCheck {
  IndexVec cell;
  double budget = 0.0;
  double analytic = 0.0;  // capped tail probability
  double mc = 0.0;
  double mc_se = 0.0;
  std::size_t reps = 0;
};

struct CounterexampleReport {
  std::vector<CounterexampleEntry> entries;
  std::vector<CounterexampleCellCheck> cell_checks;
  /// expected-count growth ratio between consecutive ladder windows, per budget
  std::vector<std::pair<double, double>> count_ratios;  // (budget, ratio)
};

CounterexampleReport counterexample_probe(const UFieldSpec& u_spec,
                                          const std::vector<long long>& window_ladder,
                                          const std::vector<double>& budgets,
                                          double control_u_max, std::size_t cell_check_reps,
                                          std::uint64_t seed, int threads = 0);

/// One normalized partial-sum sample S(box)/sqrt(vol). Box is [1,size] per axis.
double replicate_sum(const FieldModel& model, const IndexVec& size, std::uint64_t base_seed,
                     std::uint64_t replicate, const std::optional<std::uint64_t>& frozen_seed);

/// Deterministic worker pool: body(r) for r in [0, reps); output is independent
/// of the thread count because each index writes only its own slot.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);
int resolve_threads(int requested);

std::string clt_csv(const CLTResult& result);
std::string clt_json(const CLTResult& result);

}  // namespace qfield
