#include "qfield/conditional.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "json.hpp"

namespace qfield {

namespace {

struct Support {
  std::vector<double> values;
  std::vector<double> probs;
};

Support pmf_support(const InnovationSpec& spec) {
  switch (spec.kind) {
    case InnovationKind::kRademacher:
      return {{1.0, -1.0}, {0.5, 0.5}};
    case InnovationKind::kFinitePmf:
      return {spec.values, spec.probs};
    case InnovationKind::kGaussian:
      throw std::invalid_argument("exact conditioning needs a finite innovation pmf");
  }
  throw std::invalid_argument("unknown innovation kind");
}

void check_budget(std::size_t support, std::size_t free_count, std::size_t budget) {
  double branches = 1.0;
  for (std::size_t i = 0; i < free_count; ++i) {
    branches *= static_cast<double>(support);
    if (branches > static_cast<double>(budget))
      throw CapacityError("enumeration would exceed the branch budget (" +
                          std::to_string(free_count) + " free coordinates)");
  }
}

/// Enumerates pmf assignments of the coordinates listed in `slots` (indices into
/// `values`), calling body(weight) after each fill of `values`.
template <typename Body>
void enumerate(const Support& sup, const std::vector<std::size_t>& slots,
               std::vector<double>& values, Body&& body) {
  const std::size_t s = sup.values.size();
  std::vector<std::size_t> digit(slots.size(), 0);
  for (;;) {
    double w = 1.0;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      values[slots[i]] = sup.values[digit[i]];
      w *= sup.probs[digit[i]];
    }
    body(w);
    std::size_t pos = 0;
    while (pos < slots.size() && ++digit[pos] == s) digit[pos++] = 0;
    if (pos == slots.size()) break;
  }
}

std::vector<std::size_t> free_slots(const FootprintFunctional& f, const QuadrantSigma& u) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < f.footprint.size(); ++i)
    if (!u.measurable(f.footprint[i])) out.push_back(i);
  return out;
}

void place_fixed(const FootprintFunctional& f, const QuadrantSigma& u, const Assignment& fixed,
                 std::vector<double>& values) {
  for (std::size_t i = 0; i < f.footprint.size(); ++i) {
    if (!u.measurable(f.footprint[i])) continue;
    const auto it = fixed.find(f.footprint[i]);
    if (it == fixed.end())
      throw std::invalid_argument("fixed assignment misses measurable coordinate " +
                                  to_string(f.footprint[i]));
    values[i] = it->second;
  }
}

}  // namespace

double cond_exp(const FootprintFunctional& f, const QuadrantSigma& u, const Assignment& fixed,
                std::size_t branch_budget) {
  const auto sup = pmf_support(f.innovation);
  const auto slots = free_slots(f, u);
  check_budget(sup.values.size(), slots.size(), branch_budget);
  std::vector<double> values(f.footprint.size(), 0.0);
  place_fixed(f, u, fixed, values);
  double acc = 0.0;
  enumerate(sup, slots, values, [&](double w) { acc += w * f.eval(values); });
  return acc;
}

std::pair<double, double> cond_exp_mc(const FootprintFunctional& f, const QuadrantSigma& u,
                                      const Assignment& fixed, std::size_t reps,
                                      std::uint64_t seed) {
  if (reps < 2) throw std::invalid_argument("cond_exp_mc: reps must be >= 2");
  const auto slots = free_slots(f, u);
  std::vector<double> values(f.footprint.size(), 0.0);
  place_fixed(f, u, fixed, values);
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t r = 0; r < reps; ++r) {
    const std::uint64_t rs = derive_seed(seed, StreamRole::kMc, r);
    for (std::size_t i = 0; i < slots.size(); ++i)
      values[slots[i]] = f.innovation.draw(cell_key(rs, f.footprint[slots[i]]));
    const double v = f.eval(values);
    sum += v;
    sumsq += v * v;
  }
  const double n = static_cast<double>(reps);
  const double mean = sum / n;
  const double var = std::max(0.0, (sumsq - n * mean * mean) / (n - 1.0));
  return {mean, std::sqrt(var / n)};
}

FootprintFunctional cond_exp_functional(const FootprintFunctional& f, const QuadrantSigma& u,
                                        std::size_t branch_budget) {
  const auto sup = pmf_support(f.innovation);
  const auto slots = free_slots(f, u);
  check_budget(sup.values.size(), slots.size(), branch_budget);
  FootprintFunctional out;
  out.footprint = f.footprint;
  out.innovation = f.innovation;
  out.eval = [f, sup, slots](const std::vector<double>& args) {
    std::vector<double> values = args;
    double acc = 0.0;
    enumerate(sup, slots, values, [&](double w) { acc += w * f.eval(values); });
    return acc;
  };
  return out;
}

namespace {

QuadrantSigma axis_halfplane(std::size_t dim, std::size_t axis, Index level) {
  QuadrantSigma u{IndexVec(dim, kNoBound)};
  u.anchor[axis] = level;
  return u;
}

FootprintFunctional combine(const FootprintFunctional& a, const FootprintFunctional& b,
                            double sb) {
  FootprintFunctional out;
  out.footprint = a.footprint;
  out.innovation = a.innovation;
  out.eval = [a, b, sb](const std::vector<double>& v) { return a.eval(v) + sb * b.eval(v); };
  return out;
}

}  // namespace

FootprintFunctional projection(const FootprintFunctional& f, const IndexVec& u,
                               std::size_t branch_budget) {
  const std::size_t d = u.size();
  FootprintFunctional cur = f;
  for (std::size_t axis = 0; axis < d; ++axis) {
    const auto hi = cond_exp_functional(cur, axis_halfplane(d, axis, u[axis]), branch_budget);
    const auto lo = cond_exp_functional(cur, axis_halfplane(d, axis, u[axis] - 1), branch_budget);
    cur = combine(hi, lo, -1.0);
  }
  return cur;
}

FootprintFunctional projection_corner(const FootprintFunctional& f, const IndexVec& u,
                                      std::size_t branch_budget) {
  const std::size_t d = u.size();
  std::vector<std::pair<double, FootprintFunctional>> terms;
  for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
    IndexVec anchor = u;
    int lowered = 0;
    for (std::size_t axis = 0; axis < d; ++axis)
      if (mask & (std::size_t{1} << axis)) {
        --anchor[axis];
        ++lowered;
      }
    terms.emplace_back(lowered % 2 == 0 ? 1.0 : -1.0,
                       cond_exp_functional(f, QuadrantSigma{anchor}, branch_budget));
  }
  FootprintFunctional out;
  out.footprint = f.footprint;
  out.innovation = f.innovation;
  out.eval = [terms](const std::vector<double>& v) {
    double acc = 0.0;
    for (const auto& [sign, g] : terms) acc += sign * g.eval(v);
    return acc;
  };
  return out;
}

std::pair<FootprintFunctional, FootprintFunctional> truncation_split(const FootprintFunctional& f,
                                                                     double A,
                                                                     std::size_t branch_budget) {
  if (!(A > 0.0)) throw std::invalid_argument("truncation_split: A must be > 0");
  const std::size_t d = f.dim();
  auto clipped = [f, A](bool below) {
    FootprintFunctional g;
    g.footprint = f.footprint;
    g.innovation = f.innovation;
    g.eval = [f, A, below](const std::vector<double>& v) {
      const double x = f.eval(v);
      return (std::abs(x) <= A) == below ? x : 0.0;
    };
    return g;
  };
  return {projection(clipped(true), IndexVec(d, 0), branch_budget),
          projection(clipped(false), IndexVec(d, 0), branch_budget)};
}

// --- model -> functional ------------------------------------------------------

namespace {

using CellIndex = std::map<IndexVec, std::size_t>;

double eval_variant(const FieldModel& model, const IndexVec& site, const CellIndex& idx,
                    const std::vector<double>& v);

double lookup(const CellIndex& idx, const std::vector<double>& v, const IndexVec& cell) {
  const auto it = idx.find(cell);
  if (it == idx.end()) throw std::out_of_range("functional: cell not in footprint");
  return v[it->second];
}

double eval_variant(const FieldModel& model, const IndexVec& site, const CellIndex& idx,
                    const std::vector<double>& v) {
  const std::size_t d = model.dim;
  if (std::holds_alternative<IidSpec>(model.variant)) return lookup(idx, v, site);
  if (const auto* lin = std::get_if<LinearSpec>(&model.variant)) {
    double s = 0.0;
    for (const auto& [off, a] : lin->kernel.coeffs) s += a * lookup(idx, v, sub(site, off));
    return s;
  }
  if (const auto* vol = std::get_if<VolterraSpec>(&model.variant)) {
    double s = 0.0;
    for (const auto& [uv, a] : vol->coeffs.coeffs)
      s += a * lookup(idx, v, sub(site, uv.first)) * lookup(idx, v, sub(site, uv.second));
    return s;
  }
  if (const auto* po = std::get_if<ProductOmdSpec>(&model.variant)) {
    const double back = lookup(idx, v, sub(site, IndexVec(d, 1)));
    return lookup(idx, v, site) * std::sqrt(back < 0.0 ? po->u_low : po->u_high);
  }
  if (const auto* cb = std::get_if<CoboundarySpec>(&model.variant)) {
    const IndexVec e1{1, 0}, e2{0, 1};
    double s = 0.0;
    if (cb->m) s += eval_variant(*cb->m, site, idx, v);
    if (cb->m_prime)
      s += eval_variant(*cb->m_prime, site, idx, v) -
           eval_variant(*cb->m_prime, add(site, e1), idx, v);
    if (cb->m_dprime)
      s += eval_variant(*cb->m_dprime, site, idx, v) -
           eval_variant(*cb->m_dprime, add(site, e2), idx, v);
    if (cb->y)
      s += eval_variant(*cb->y, site, idx, v) - eval_variant(*cb->y, add(site, e1), idx, v) -
           eval_variant(*cb->y, add(site, e2), idx, v) +
           eval_variant(*cb->y, add(site, add(e1, e2)), idx, v);
    return s;
  }
  throw std::invalid_argument("model has no finite-footprint functional form");
}

}  // namespace

FootprintFunctional model_functional(const FieldModel& model, const IndexVec& site) {
  if (std::holds_alternative<UFieldSpec>(model.variant))
    throw std::invalid_argument("u-field values depend on level events, not a finite pmf");
  FootprintFunctional out;
  std::set<IndexVec> cells;
  for (const IndexVec& c : footprint_cells(model)) cells.insert(add(c, site));
  out.footprint = {cells.begin(), cells.end()};
  out.innovation = model.innovation;
  CellIndex idx;
  for (std::size_t i = 0; i < out.footprint.size(); ++i) idx[out.footprint[i]] = i;
  out.eval = [model, site, idx](const std::vector<double>& v) {
    return eval_variant(model, site, idx, v);
  };
  return out;
}

FootprintFunctional model_functional(const FieldModel& model) {
  return model_functional(model, IndexVec(model.dim, 0));
}

// --- structure verification ---------------------------------------------------

namespace {

/// Runs body(assignment) over all pmf assignments of `coords`.
template <typename Body>
void for_each_assignment(const Support& sup, const std::vector<IndexVec>& coords, Body&& body) {
  Assignment a;
  std::vector<std::size_t> digit(coords.size(), 0);
  const std::size_t s = sup.values.size();
  for (;;) {
    for (std::size_t i = 0; i < coords.size(); ++i) a[coords[i]] = sup.values[digit[i]];
    body(a);
    std::size_t pos = 0;
    while (pos < coords.size() && ++digit[pos] == s) digit[pos++] = 0;
    if (pos == coords.size()) break;
  }
}

}  // namespace

StructureReport verify_ortho(const FieldModel& model, const std::vector<IndexVec>& offsets,
                             double tol, std::size_t branch_budget) {
  const std::size_t d = model.dim;
  StructureReport rep;
  rep.check = "ortho";
  {
    std::ostringstream p;
    p << "tol=" << tol << " offsets=" << offsets.size();
    rep.parameters = p.str();
  }
  const auto sup = pmf_support(model.innovation);
  for_each_point(Rect(IndexVec(d, 0), IndexVec(d, 2)), [&](const IndexVec& site) {
    const auto f = model_functional(model, site);
    for (const IndexVec& anchor : offsets) {
      bool lowered = false;
      for (std::size_t a = 0; a < d; ++a)
        if (anchor[a] < site[a]) lowered = true;
      if (!lowered) continue;
      const QuadrantSigma u{anchor};
      std::vector<IndexVec> measurable;
      for (const IndexVec& c : f.footprint)
        if (u.measurable(c)) measurable.push_back(c);
      check_budget(sup.values.size(), measurable.size(), branch_budget);
      for_each_assignment(sup, measurable, [&](const Assignment& fixed) {
        const double dev = std::abs(cond_exp(f, u, fixed, branch_budget));
        if (dev > rep.max_deviation) {
          rep.max_deviation = dev;
          rep.witness = fixed;
        }
        if (dev > tol) rep.violations.push_back({site, anchor, fixed, dev});
      });
    }
  });
  rep.pass = rep.violations.empty();
  return rep;
}

StructureReport verify_commuting(const FootprintFunctional& f, const IndexVec& u,
                                 const IndexVec& a, double tol, std::size_t branch_budget) {
  StructureReport rep;
  rep.check = "commuting";
  rep.parameters = "u=" + to_string(u) + " a=" + to_string(a) + " tol=" + std::to_string(tol);
  const auto sup = pmf_support(f.innovation);
  check_budget(sup.values.size(), f.footprint.size(), branch_budget);
  const QuadrantSigma qu{u}, qa{a}, qm = qu.meet_with(qa);
  const auto inner = cond_exp_functional(f, qa, branch_budget);
  for_each_assignment(sup, f.footprint, [&](const Assignment& full) {
    Assignment fu, fm;
    for (const auto& [c, val] : full) {
      if (qu.measurable(c)) fu[c] = val;
      if (qm.measurable(c)) fm[c] = val;
    }
    const double lhs = cond_exp(inner, qu, fu, branch_budget);
    const double rhs = cond_exp(f, qm, fm, branch_budget);
    const double dev = std::abs(lhs - rhs);
    if (dev > rep.max_deviation) {
      rep.max_deviation = dev;
      rep.witness = full;
    }
    if (dev > tol) rep.violations.push_back({u, a, full, dev});
  });
  rep.pass = rep.violations.empty();
  return rep;
}

// --- (con1) moment grid -------------------------------------------------------

namespace {

/// past-innovation coefficient map of E(S_n | F_0) for linear models:
/// E_0 S_n = sum_{w <= 0} c_w xi_w.
std::map<IndexVec, double> linear_past_coeffs(const Kernel& kernel, const IndexVec& n) {
  const std::size_t d = n.size();
  std::map<IndexVec, double> c;
  for (const auto& [off, a] : kernel.coeffs) {
    // sites k in [1, n], contribution at w = k - off; keep w <= 0
    IndexVec lo(d), hi(d);
    bool empty = false;
    for (std::size_t i = 0; i < d; ++i) {
      lo[i] = 1;
      hi[i] = std::min(n[i], off[i]) + 1;  // k_i <= off_i forces w_i <= 0
      if (hi[i] <= lo[i]) empty = true;
    }
    if (empty) continue;
    for_each_point(Rect(lo, hi), [&, a = a, &off = off](const IndexVec& k) {
      c[sub(k, off)] += a;
    });
  }
  std::erase_if(c, [](const auto& kv) { return kv.second == 0.0; });
  return c;
}

/// Volterra analogue: E_0 S_n = sum over coefficient pairs with both factor
/// cells in the past quadrant.
std::map<std::pair<IndexVec, IndexVec>, double> volterra_past_coeffs(const VolterraCoeffs& coeffs,
                                                                     const IndexVec& n) {
  const std::size_t d = n.size();
  std::map<std::pair<IndexVec, IndexVec>, double> c;
  for (const auto& [uv, a] : coeffs.coeffs) {
    const auto& [u0, v0] = uv;
    IndexVec lo(d), hi(d);
    bool empty = false;
    for (std::size_t i = 0; i < d; ++i) {
      lo[i] = 1;
      hi[i] = std::min({n[i], u0[i], v0[i]}) + 1;
      if (hi[i] <= lo[i]) empty = true;
    }
    if (empty) continue;
    for_each_point(Rect(lo, hi), [&, a = a](const IndexVec& k) {
      c[{sub(k, u0), sub(k, v0)}] += a;
    });
  }
  std::erase_if(c, [](const auto& kv) { return kv.second == 0.0; });
  return c;
}

/// f-moment of a finite linear form sum c_w xi_w: exact for plain second
/// moment, enumeration for other functionals, MC beyond the budget.
double linear_form_moment(const std::map<IndexVec, double>& c, const InnovationSpec& innov,
                          const MomentFunctional& f, std::size_t branch_budget, std::size_t mc_reps,
                          std::uint64_t seed, double* se) {
  *se = 0.0;
  if (f.kind == MomentFunctional::Kind::kPlain && innov.finite_support()) {
    double s = 0.0;
    for (const auto& [w, cw] : c) s += cw * cw;
    return s * innov.variance();
  }
  std::vector<IndexVec> cells;
  std::vector<double> coef;
  for (const auto& [w, cw] : c) {
    cells.push_back(w);
    coef.push_back(cw);
  }
  if (innov.finite_support()) {
    const Support sup = pmf_support(innov);
    bool fits = true;
    try {
      check_budget(sup.values.size(), cells.size(), branch_budget);
    } catch (const CapacityError&) {
      fits = false;
    }
    if (fits) {
      std::vector<double> vals(cells.size(), 0.0);
      std::vector<std::size_t> slots(cells.size());
      for (std::size_t i = 0; i < slots.size(); ++i) slots[i] = i;
      double acc = 0.0;
      enumerate(sup, slots, vals, [&](double w) {
        double x = 0.0;
        for (std::size_t i = 0; i < vals.size(); ++i) x += coef[i] * vals[i];
        acc += w * f(x);
      });
      return acc;
    }
  }
  if (mc_reps < 2) throw CapacityError("linear-form moment needs mc_reps >= 2 beyond the budget");
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t r = 0; r < mc_reps; ++r) {
    const std::uint64_t rs = derive_seed(seed, StreamRole::kMc, r);
    double x = 0.0;
    for (std::size_t i = 0; i < cells.size(); ++i)
      x += coef[i] * innov.draw(cell_key(rs, cells[i]));
    const double y = f(x);
    sum += y;
    sumsq += y * y;
  }
  const double nn = static_cast<double>(mc_reps);
  const double mean = sum / nn;
  *se = std::sqrt(std::max(0.0, (sumsq - nn * mean * mean) / (nn - 1.0)) / nn);
  return mean;
}

}  // namespace

Con1Report check_con1(const FieldModel& model, Index n_max, const MomentFunctional& f,
                      std::size_t mc_reps, std::uint64_t seed, std::size_t branch_budget) {
  if (n_max < 1) throw std::invalid_argument("check_con1: N must be >= 1");
  const std::size_t d = model.dim;
  Con1Report rep;
  rep.arg_sup = IndexVec(d, 1);

  const bool omd = is_structural_omd(model);
  const auto* lin = std::get_if<LinearSpec>(&model.variant);
  const auto* vol = std::get_if<VolterraSpec>(&model.variant);
  if (!omd && !lin && !vol)
    throw std::invalid_argument("check_con1: unsupported model variant (no coefficient form)");

  double prev_sup = -1.0;
  for_each_point(Rect(IndexVec(d, 1), IndexVec(d, n_max + 1)), [&](const IndexVec& n) {
    Con1Entry e;
    e.n = n;
    if (omd) {
      e.value = 0.0;
    } else if (lin) {
      e.value = linear_form_moment(linear_past_coeffs(lin->kernel, n), model.innovation, f,
                                   branch_budget, mc_reps, seed, &e.se);
    } else {
      // flatten the quadratic form's pair coefficients into per-pair cells and
      // enumerate / MC like the linear case but with products
      const auto c = volterra_past_coeffs(vol->coeffs, n);
      if (f.kind == MomentFunctional::Kind::kPlain) {
        // E(sum a_{uv} xi_u xi_v)^2 = sum_{u!=v} a_{uv}(a_{uv}+a_{vu}) var^2
        const double v2 = model.innovation.variance() * model.innovation.variance();
        double s = 0.0;
        for (const auto& [uv, a] : c) {
          const auto sym = c.find({uv.second, uv.first});
          s += a * (a + (sym == c.end() ? 0.0 : sym->second)) * v2;
        }
        e.value = s;
      } else {
        std::set<IndexVec> cellset;
        for (const auto& [uv, a] : c) {
          (void)a;
          cellset.insert(uv.first);
          cellset.insert(uv.second);
        }
        std::vector<IndexVec> cells(cellset.begin(), cellset.end());
        CellIndex idx;
        for (std::size_t i = 0; i < cells.size(); ++i) idx[cells[i]] = i;
        const Support sup = pmf_support(model.innovation);
        check_budget(sup.values.size(), cells.size(), branch_budget);
        std::vector<double> vals(cells.size(), 0.0);
        std::vector<std::size_t> slots(cells.size());
        for (std::size_t i = 0; i < slots.size(); ++i) slots[i] = i;
        double acc = 0.0;
        enumerate(sup, slots, vals, [&](double w) {
          double x = 0.0;
          for (const auto& [uv, a] : c) x += a * vals[idx.at(uv.first)] * vals[idx.at(uv.second)];
          acc += w * f(x);
        });
        e.value = acc;
      }
    }
    if (e.value > rep.sup) {
      rep.sup = e.value;
      rep.arg_sup = n;
    }
    rep.exact = rep.exact && e.se == 0.0;
    rep.grid.push_back(e);
  });

  // stabilized: the sup is already attained strictly inside the grid shell
  prev_sup = 0.0;
  for (const auto& e : rep.grid) {
    bool on_shell = false;
    for (std::size_t i = 0; i < d; ++i)
      if (e.n[i] == n_max) on_shell = true;
    if (!on_shell) prev_sup = std::max(prev_sup, e.value);
  }
  rep.stabilized = n_max > 1 && prev_sup >= rep.sup;
  return rep;
}

std::string report_to_json(const StructureReport& report) {
  nlohmann::json j;
  j["check"] = report.check;
  j["parameters"] = report.parameters;
  j["max_deviation"] = report.max_deviation;
  j["pass"] = report.pass;
  nlohmann::json w = nlohmann::json::object();
  for (const auto& [cell, v] : report.witness) w[to_string(cell)] = v;
  j["witness"] = w;
  nlohmann::json viol = nlohmann::json::array();
  for (const auto& v : report.violations) {
    nlohmann::json jv;
    jv["site"] = to_string(v.site);
    jv["anchor"] = to_string(v.anchor);
    jv["deviation"] = v.deviation;
    viol.push_back(jv);
  }
  j["violations"] = viol;
  return j.dump(2);
}

}  // namespace qfield
