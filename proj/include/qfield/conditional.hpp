#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qfield/models.hpp"

namespace qfield {

/// Quadrant sigma-field F_u = sigma(xi_w : w <= u coordinatewise).
/// kNoBound on an axis means "no constraint" (half-plane field).
struct QuadrantSigma {
  IndexVec anchor;

  bool measurable(const IndexVec& cell) const { return leq(cell, anchor); }
  QuadrantSigma meet_with(const QuadrantSigma& other) const { return {meet(anchor, other.anchor)}; }
};

/// Thrown when exact enumeration would exceed the branch budget.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Finite-footprint functional of the innovation field. `eval` receives values
/// aligned with `footprint` order.
struct FootprintFunctional {
  std::vector<IndexVec> footprint;
  InnovationSpec innovation;
  std::function<double(const std::vector<double>&)> eval;

  std::size_t dim() const { return footprint.empty() ? 0 : footprint.front().size(); }
};

using Assignment = std::map<IndexVec, double>;

inline constexpr std::size_t kDefaultBranchBudget = std::size_t{1} << 20;

/// Exact E(f | F_u) at the point determined by `fixed` (which must cover every
/// measurable footprint coordinate). Free coordinates are averaged under the pmf.
double cond_exp(const FootprintFunctional& f, const QuadrantSigma& u, const Assignment& fixed,
                std::size_t branch_budget = kDefaultBranchBudget);

/// Monte Carlo version of cond_exp; returns (estimate, standard error).
std::pair<double, double> cond_exp_mc(const FootprintFunctional& f, const QuadrantSigma& u,
                                      const Assignment& fixed, std::size_t reps,
                                      std::uint64_t seed);

/// E(f | F_u) as a functional (footprint unchanged; free coordinates ignored).
FootprintFunctional cond_exp_functional(const FootprintFunctional& f, const QuadrantSigma& u,
                                        std::size_t branch_budget = kDefaultBranchBudget);

/// Projection P_u = prod over axes of (E at level u_a minus E at level u_a - 1),
/// composed in ascending axis order.
FootprintFunctional projection(const FootprintFunctional& f, const IndexVec& u,
                               std::size_t branch_budget = kDefaultBranchBudget);

/// Same operator realized as the 2^d corner inclusion-exclusion sum; used to
/// cross-check composition-order independence.
FootprintFunctional projection_corner(const FootprintFunctional& f, const IndexVec& u,
                                      std::size_t branch_budget = kDefaultBranchBudget);

/// X = P(X 1(|X|<=A)) + P(X 1(|X|>A)) at the origin; both parts returned.
std::pair<FootprintFunctional, FootprintFunctional> truncation_split(
    const FootprintFunctional& f, double A, std::size_t branch_budget = kDefaultBranchBudget);

/// The field value at `site` as a functional of its footprint innovations.
/// Requires a finite innovation pmf for exact work downstream.
FootprintFunctional model_functional(const FieldModel& model, const IndexVec& site);
FootprintFunctional model_functional(const FieldModel& model);

struct Violation {
  IndexVec site;
  IndexVec anchor;
  Assignment witness;
  double deviation = 0.0;
};

struct StructureReport {
  std::string check;
  std::string parameters;
  double max_deviation = 0.0;
  Assignment witness;
  bool pass = false;
  std::vector<Violation> violations;
};

/// max over sites in [0,2)^d and anchors in O (with some axis strictly below the
/// site) of |E(X_site | F_anchor)|, over all measurable assignments.
StructureReport verify_ortho(const FieldModel& model, const std::vector<IndexVec>& offsets,
                             double tol, std::size_t branch_budget = kDefaultBranchBudget);

/// Pointwise check of E_u E_a f = E_{u meet a} f over every full assignment.
StructureReport verify_commuting(const FootprintFunctional& f, const IndexVec& u,
                                 const IndexVec& a, double tol,
                                 std::size_t branch_budget = kDefaultBranchBudget);

struct Con1Entry {
  IndexVec n;
  double value = 0.0;
  double se = 0.0;  // nonzero only on the MC path
};

struct Con1Report {
  std::vector<Con1Entry> grid;
  double sup = 0.0;
  IndexVec arg_sup;
  bool stabilized = false;  // running sup unchanged over the last grid shell
  bool exact = true;
};

/// f-moment of E(S_n | F_0) over the grid n in [1,N]^d. Exact coefficient path
/// for i.i.d./linear/Volterra and structural orthomartingale differences;
/// Monte Carlo fallback otherwise (mc_reps > 0 required there).
Con1Report check_con1(const FieldModel& model, Index n_max, const MomentFunctional& f,
                      std::size_t mc_reps = 0, std::uint64_t seed = 0,
                      std::size_t branch_budget = kDefaultBranchBudget);

std::string report_to_json(const StructureReport& report);

}  // namespace qfield
