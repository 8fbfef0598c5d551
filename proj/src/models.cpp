#include "qfield/models.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace qfield {

void Kernel::validate(std::size_t dim) const {
  for (const auto& [off, val] : coeffs) {
    (void)val;
    if (off.size() != dim) throw std::invalid_argument("kernel: offset dimension mismatch");
    for (Index c : off)
      if (c < 0) throw std::invalid_argument("kernel: offsets must be >= 0 (causality)");
  }
}

double Kernel::sum_sq() const {
  double s = 0.0;
  for (const auto& [off, val] : coeffs) s += val * val;
  return s;
}

double Kernel::sum() const {
  double s = 0.0;
  for (const auto& [off, val] : coeffs) s += val;
  return s;
}

void VolterraCoeffs::validate(std::size_t dim) const {
  for (const auto& [uv, val] : coeffs) {
    (void)val;
    const auto& [u, v] = uv;
    if (u.size() != dim || v.size() != dim)
      throw std::invalid_argument("volterra: offset dimension mismatch");
    for (Index c : u)
      if (c < 0) throw std::invalid_argument("volterra: offsets must be >= 0");
    for (Index c : v)
      if (c < 0) throw std::invalid_argument("volterra: offsets must be >= 0");
    if (u == v) throw std::invalid_argument("volterra: diagonal coefficients must vanish");
  }
}

void FieldModel::validate() const {
  innovation.validate();
  if (dim < 1) throw std::invalid_argument("model: dimension must be >= 1");
  if (const auto* lin = std::get_if<LinearSpec>(&variant)) {
    lin->kernel.validate(dim);
  } else if (const auto* vol = std::get_if<VolterraSpec>(&variant)) {
    vol->coeffs.validate(dim);
  } else if (const auto* po = std::get_if<ProductOmdSpec>(&variant)) {
    if (!(po->u_low >= 0.0 && po->u_high >= 0.0))
      throw std::invalid_argument("product-omd: U levels must be >= 0");
  } else if (const auto* uf = std::get_if<UFieldSpec>(&variant)) {
    if (uf->n_max < 2) throw std::invalid_argument("u-field: n_max must be >= 2");
  } else if (const auto* cb = std::get_if<CoboundarySpec>(&variant)) {
    if (dim != 2) throw std::invalid_argument("coboundary: only d = 2 supported");
    for (const auto& part : {cb->m, cb->m_prime, cb->m_dprime, cb->y}) {
      if (!part) continue;
      if (part->dim != dim) throw std::invalid_argument("coboundary: component dimension mismatch");
      if (part->is_coboundary()) throw std::invalid_argument("coboundary: no nesting");
      part->validate();
    }
  }
}

namespace {

void insert_shifted(std::set<IndexVec>& out, const FieldModel& part,
                    const std::vector<IndexVec>& shifts) {
  for (const IndexVec& cell : footprint_cells(part))
    for (const IndexVec& s : shifts) out.insert(add(cell, s));
}

}  // namespace

std::vector<IndexVec> footprint_cells(const FieldModel& model) {
  const std::size_t d = model.dim;
  std::set<IndexVec> cells;
  if (std::holds_alternative<IidSpec>(model.variant)) {
    cells.insert(IndexVec(d, 0));
  } else if (const auto* lin = std::get_if<LinearSpec>(&model.variant)) {
    for (const auto& [off, val] : lin->kernel.coeffs) {
      (void)val;
      cells.insert(sub(IndexVec(d, 0), off));
    }
  } else if (const auto* vol = std::get_if<VolterraSpec>(&model.variant)) {
    for (const auto& [uv, val] : vol->coeffs.coeffs) {
      (void)val;
      cells.insert(sub(IndexVec(d, 0), uv.first));
      cells.insert(sub(IndexVec(d, 0), uv.second));
    }
  } else if (std::holds_alternative<ProductOmdSpec>(model.variant) ||
             std::holds_alternative<UFieldSpec>(model.variant)) {
    cells.insert(IndexVec(d, 0));
    cells.insert(IndexVec(d, -1));
  } else if (const auto* cb = std::get_if<CoboundarySpec>(&model.variant)) {
    const IndexVec zero(d, 0), e1{1, 0}, e2{0, 1}, e12{1, 1};
    if (cb->m) insert_shifted(cells, *cb->m, {zero});
    if (cb->m_prime) insert_shifted(cells, *cb->m_prime, {zero, e1});
    if (cb->m_dprime) insert_shifted(cells, *cb->m_dprime, {zero, e2});
    if (cb->y) insert_shifted(cells, *cb->y, {zero, e1, e2, e12});
  }
  return {cells.begin(), cells.end()};
}

Rect footprint_bounds(const FieldModel& model) {
  const auto cells = footprint_cells(model);
  const std::size_t d = model.dim;
  IndexVec lo(d, 0), hi(d, 0);
  if (!cells.empty()) {
    lo = hi = cells.front();
    for (const auto& c : cells)
      for (std::size_t i = 0; i < d; ++i) {
        lo[i] = std::min(lo[i], c[i]);
        hi[i] = std::max(hi[i], c[i]);
      }
  }
  for (std::size_t i = 0; i < d; ++i) ++hi[i];
  return Rect(lo, hi);
}

Rect required_window(const FieldModel& model, const Rect& field_window) {
  const Rect fb = footprint_bounds(model);
  IndexVec lo(model.dim), hi(model.dim);
  for (std::size_t i = 0; i < model.dim; ++i) {
    lo[i] = field_window.lo[i] + fb.lo[i];
    hi[i] = field_window.hi[i] + fb.hi[i] - 1;
  }
  return Rect(lo, hi);
}

bool is_structural_omd(const FieldModel& model) {
  if (std::holds_alternative<IidSpec>(model.variant) ||
      std::holds_alternative<ProductOmdSpec>(model.variant) ||
      std::holds_alternative<UFieldSpec>(model.variant))
    return true;
  if (const auto* lin = std::get_if<LinearSpec>(&model.variant))
    return lin->kernel.coeffs.size() <= 1 &&
           (lin->kernel.coeffs.empty() ||
            lin->kernel.coeffs.begin()->first == IndexVec(model.dim, 0));
  if (const auto* vol = std::get_if<VolterraSpec>(&model.variant)) {
    // every pair must touch the "current" layer on every axis through at least
    // one of its two factors, else a lowered quadrant keeps both measurable
    for (const auto& [uv, val] : vol->coeffs.coeffs) {
      (void)val;
      for (std::size_t a = 0; a < model.dim; ++a)
        if (std::min(uv.first[a], uv.second[a]) > 0) return false;
    }
    return true;
  }
  return false;
}

double eval_field(const FieldModel& model, const InnovationLattice& lattice, const IndexVec& k) {
  const std::size_t d = model.dim;
  if (k.size() != d) throw std::invalid_argument("eval_field: index dimension mismatch");
  const auto xi = [&](const IndexVec& cell) { return lattice.values.at(cell); };

  if (std::holds_alternative<IidSpec>(model.variant)) return xi(k);

  if (const auto* lin = std::get_if<LinearSpec>(&model.variant)) {
    double s = 0.0;
    for (const auto& [off, a] : lin->kernel.coeffs) s += a * xi(sub(k, off));
    return s;
  }
  if (const auto* vol = std::get_if<VolterraSpec>(&model.variant)) {
    double s = 0.0;
    for (const auto& [uv, a] : vol->coeffs.coeffs)
      s += a * xi(sub(k, uv.first)) * xi(sub(k, uv.second));
    return s;
  }
  if (const auto* po = std::get_if<ProductOmdSpec>(&model.variant)) {
    const IndexVec back = sub(k, IndexVec(d, 1));
    const double u = xi(back) < 0.0 ? po->u_low : po->u_high;
    return xi(k) * std::sqrt(u);
  }
  if (const auto* uf = std::get_if<UFieldSpec>(&model.variant)) {
    const IndexVec back = sub(k, IndexVec(d, 1));
    if (!lattice.window.contains_point(back))
      throw std::out_of_range("eval_field: footprint escapes lattice window");
    return xi(k) * std::sqrt(u_field_value(lattice, back, uf->n_max));
  }
  const auto& cb = std::get<CoboundarySpec>(model.variant);
  const IndexVec e1{1, 0}, e2{0, 1};
  double s = 0.0;
  if (cb.m) s += eval_field(*cb.m, lattice, k);
  if (cb.m_prime) s += eval_field(*cb.m_prime, lattice, k) - eval_field(*cb.m_prime, lattice, add(k, e1));
  if (cb.m_dprime)
    s += eval_field(*cb.m_dprime, lattice, k) - eval_field(*cb.m_dprime, lattice, add(k, e2));
  if (cb.y)
    s += eval_field(*cb.y, lattice, k) - eval_field(*cb.y, lattice, add(k, e1)) -
         eval_field(*cb.y, lattice, add(k, e2)) + eval_field(*cb.y, lattice, add(k, add(e1, e2)));
  return s;
}

NdArray field_window(const FieldModel& model, const InnovationLattice& lattice,
                     const Rect& window) {
  if (!lattice.window.contains_rect(required_window(model, window)))
    throw std::out_of_range("field_window: footprint escapes lattice window");
  NdArray out(window);
  auto& data = out.data();
  std::size_t i = 0;
  for_each_point(window, [&](const IndexVec& k) { data[i++] = eval_field(model, lattice, k); });
  return out;
}

std::optional<double> field_bound(const FieldModel& model) {
  const auto xi_bound = [&]() -> std::optional<double> {
    switch (model.innovation.kind) {
      case InnovationKind::kRademacher:
        return 1.0;
      case InnovationKind::kFinitePmf: {
        double b = 0.0;
        for (double v : model.innovation.values) b = std::max(b, std::abs(v));
        return b;
      }
      case InnovationKind::kGaussian:
        return std::nullopt;
    }
    return std::nullopt;
  }();
  if (!xi_bound) return std::nullopt;

  if (std::holds_alternative<IidSpec>(model.variant)) return xi_bound;
  if (const auto* lin = std::get_if<LinearSpec>(&model.variant)) {
    double s = 0.0;
    for (const auto& [off, a] : lin->kernel.coeffs) s += std::abs(a);
    return s * *xi_bound;
  }
  if (const auto* vol = std::get_if<VolterraSpec>(&model.variant)) {
    double s = 0.0;
    for (const auto& [uv, a] : vol->coeffs.coeffs) s += std::abs(a);
    return s * *xi_bound * *xi_bound;
  }
  if (const auto* po = std::get_if<ProductOmdSpec>(&model.variant))
    return std::sqrt(std::max(po->u_low, po->u_high)) * *xi_bound;
  if (const auto* uf = std::get_if<UFieldSpec>(&model.variant)) {
    double umax = 0.0;
    for (long long n = 2; n <= uf->n_max; ++n) umax += u_level_value(n);
    return std::sqrt(umax) * *xi_bound;  // finite but astronomically loose
  }
  const auto& cb = std::get<CoboundarySpec>(model.variant);
  double s = 0.0;
  for (const auto& [part, mult] :
       std::initializer_list<std::pair<const std::shared_ptr<const FieldModel>&, double>>{
           {cb.m, 1.0}, {cb.m_prime, 2.0}, {cb.m_dprime, 2.0}, {cb.y, 4.0}}) {
    if (!part) continue;
    const auto b = field_bound(*part);
    if (!b) return std::nullopt;
    s += mult * *b;
  }
  return s;
}

// --- coefficient machinery ----------------------------------------------------

std::map<IndexVec, double> lin_b_coeffs(const Kernel& kernel, const IndexVec& n) {
  for (Index c : n)
    if (c < 1) throw std::invalid_argument("lin_b_coeffs: n must be >= 1 coordinatewise");
  const std::size_t d = n.size();
  std::map<IndexVec, double> b;
  for (const auto& [s, a] : kernel.coeffs) {
    // k runs over [0, n-1] with k <= s; contributes a to b at i = s - k
    IndexVec kmax(d);
    for (std::size_t i = 0; i < d; ++i) kmax[i] = std::min(n[i] - 1, s[i]);
    bool empty = false;
    for (std::size_t i = 0; i < d; ++i)
      if (kmax[i] < 0) empty = true;
    if (empty) continue;
    IndexVec hi(d);
    for (std::size_t i = 0; i < d; ++i) hi[i] = kmax[i] + 1;
    for_each_point(Rect(IndexVec(d, 0), hi),
                   [&, a = a, &s = s](const IndexVec& k) { b[sub(s, k)] += a; });
  }
  std::erase_if(b, [](const auto& kv) { return kv.second == 0.0; });
  return b;
}

namespace {

template <typename ValueFn>
SupCheck sup_over_box(std::size_t dim, Index n_max, ValueFn&& value) {
  if (n_max < 1) throw std::invalid_argument("sup check: N_max must be >= 1");
  SupCheck out;
  out.argmax = IndexVec(dim, 1);
  IndexVec lo(dim, 1), hi(dim, n_max + 1);
  bool first = true;
  for_each_point(Rect(lo, hi), [&](const IndexVec& n) {
    const double v = value(n);
    if (first || v > out.sup) {
      out.sup = v;
      out.argmax = n;
      first = false;
    }
  });
  std::vector<double> diag;
  diag.reserve(static_cast<std::size_t>(n_max));
  for (Index n = 1; n <= n_max; ++n) diag.push_back(value(IndexVec(dim, n)));
  out.stabilized_value = diag.back();
  out.stabilized_at = n_max;
  for (Index n = n_max; n >= 1; --n) {
    if (diag[static_cast<std::size_t>(n - 1)] != out.stabilized_value) break;
    out.stabilized_at = n;
  }
  return out;
}

}  // namespace

SupCheck check_lin(const Kernel& kernel, std::size_t dim, Index n_max) {
  return sup_over_box(dim, n_max, [&](const IndexVec& n) {
    double s = 0.0;
    for (const auto& [i, b] : lin_b_coeffs(kernel, n)) s += b * b;
    return s;
  });
}

std::map<std::pair<IndexVec, IndexVec>, double> volterra_c_coeffs(const VolterraCoeffs& coeffs,
                                                                  const IndexVec& j) {
  for (Index c : j)
    if (c < 1) throw std::invalid_argument("volterra_c_coeffs: j must be >= 1 coordinatewise");
  const std::size_t d = j.size();
  std::map<std::pair<IndexVec, IndexVec>, double> c;
  for (const auto& [uv, a] : coeffs.coeffs) {
    const auto& [u0, v0] = uv;
    IndexVec kmax(d);
    bool empty = false;
    for (std::size_t i = 0; i < d; ++i) {
      kmax[i] = std::min({j[i] - 1, u0[i], v0[i]});
      if (kmax[i] < 0) empty = true;
    }
    if (empty) continue;
    IndexVec hi(d);
    for (std::size_t i = 0; i < d; ++i) hi[i] = kmax[i] + 1;
    for_each_point(Rect(IndexVec(d, 0), hi), [&, a = a](const IndexVec& k) {
      c[{sub(u0, k), sub(v0, k)}] += a;
    });
  }
  std::erase_if(c, [](const auto& kv) { return kv.second == 0.0; });
  return c;
}

SupCheck check_volt(const VolterraCoeffs& coeffs, std::size_t dim, Index n_max) {
  return sup_over_box(dim, n_max, [&](const IndexVec& j) {
    double s = 0.0;
    for (const auto& [uv, c] : volterra_c_coeffs(coeffs, j)) s += c * c;
    return s;
  });
}

// --- moment functionals and the heavy-level series ----------------------------

MomentFunctional MomentFunctional::g_eps(double eps) {
  if (eps < 0.0 || eps >= 1.0) throw std::invalid_argument("g_eps: eps must be in [0,1)");
  return {Kind::kGEps, eps, 2};
}
MomentFunctional MomentFunctional::phi_d(int d) {
  if (d < 2) throw std::invalid_argument("phi_d: d must be >= 2");
  return {Kind::kPhiD, 0.0, d};
}
MomentFunctional MomentFunctional::plain() { return {Kind::kPlain, 0.0, 2}; }

double MomentFunctional::operator()(double x) const {
  x = std::abs(x);
  switch (kind) {
    case Kind::kGEps:
      return x * std::pow(std::log1p(x), 1.0 - eps);
    case Kind::kPhiD:
      return x * x * std::pow(std::log1p(x), d - 1);
    case Kind::kPlain:
      return x * x;
  }
  return 0.0;
}

double u_mean(long long n_max) {
  if (n_max < 2) throw std::invalid_argument("u_mean: n_max must be >= 2");
  double s = 0.0;
  for (long long n = 2; n <= n_max; ++n) s += u_level_prob(n) * u_level_value(n);
  return s;
}

std::vector<std::pair<long long, double>> u_moment_series(long long n_max,
                                                          const MomentFunctional& f,
                                                          std::vector<long long> checkpoints) {
  if (n_max < 2) throw std::invalid_argument("u_moment_series: n_max must be >= 2");
  if (checkpoints.empty()) {
    for (long long c = 10; c < n_max; c *= 10) checkpoints.push_back(c);
    checkpoints.push_back(n_max);
  }
  std::sort(checkpoints.begin(), checkpoints.end());
  std::vector<std::pair<long long, double>> out;
  double s = 0.0;
  std::size_t ci = 0;
  for (long long n = 2; n <= n_max && ci < checkpoints.size(); ++n) {
    s += u_level_prob(n) * f(u_level_value(n));
    while (ci < checkpoints.size() && checkpoints[ci] == n) {
      out.emplace_back(n, s);
      ++ci;
    }
  }
  return out;
}

namespace {

// smallest n >= 8 on the increasing branch with n/ln^2 n >= t
long long u_level_inverse(double t) {
  if (u_level_value(8) >= t) return 8;
  double n = std::max(8.0, t * std::log(std::max(t, 8.0)) * std::log(std::max(t, 8.0)));
  for (int it = 0; it < 8; ++it) {
    const double ln = std::log(n);
    n = t * ln * ln;
  }
  long long m = static_cast<long long>(n);
  while (m > 8 && u_level_value(m - 1) >= t) --m;
  while (u_level_value(m) < t) ++m;
  return m;
}

inline double trigamma_tail(double m) {
  // sum_{n>=m} 1/n^2 via the asymptotic expansion of psi'(m)
  return 1.0 / m + 1.0 / (2.0 * m * m) + 1.0 / (6.0 * m * m * m) -
         1.0 / (30.0 * m * m * m * m * m);
}

}  // namespace

double u_tail_sum(double t) {
  double s = 0.0;
  for (long long n = 2; n <= 7; ++n)
    if (u_level_value(n) >= t) s += u_level_prob(n);
  s += 0.5 * trigamma_tail(static_cast<double>(u_level_inverse(t)));
  return s;
}

double u_tail_prob_capped(double t, long long n_max) {
  double log_miss = 0.0;
  for (long long n = 2; n <= 7 && n <= n_max; ++n)
    if (u_level_value(n) >= t) log_miss += std::log1p(-u_level_prob(n));
  const long long m = u_level_inverse(t);
  if (m <= n_max) {
    // sum_{m..n_max} log(1-p_n) ~ -(sum p) - (sum p^2)/2, p_n = 1/(2n^2)
    const double lo = static_cast<double>(std::max<long long>(m, 8));
    const double hi = static_cast<double>(n_max + 1);
    const double sp = 0.5 * (trigamma_tail(lo) - trigamma_tail(hi));
    const auto quartic_tail = [](double x) {
      // Euler-Maclaurin for sum_{n>=x} n^-4
      return 1.0 / (3.0 * x * x * x) + 1.0 / (2.0 * x * x * x * x) +
             1.0 / (3.0 * std::pow(x, 5)) - 1.0 / (6.0 * std::pow(x, 7));
    };
    const double sp2 = 0.25 * (quartic_tail(lo) - quartic_tail(hi));
    log_miss += -sp - 0.5 * sp2;
  }
  return -std::expm1(log_miss);
}

double u_field_value(const InnovationLattice& lattice, const IndexVec& cell, long long n_max) {
  const std::uint64_t key = cell_key(lattice.level_stream(cell), cell);
  double u = 0.0;
  for (long long n = 2; n <= n_max; ++n) {
    const std::uint64_t h =
        splitmix64(key ^ (static_cast<std::uint64_t>(n) * 0x9e3779b97f4a7c15ULL));
    if (unit_from_key(h) < u_level_prob(n)) u += u_level_value(n);
  }
  return u;
}

}  // namespace qfield
