#include "qfield/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

#include "qfield/conditional.hpp"

namespace qfield {

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("QFIELD_THREADS")) {
    const int t = std::atoi(env);
    if (t > 0) return t;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body) {
  const int t = std::min<std::size_t>(resolve_threads(threads), std::max<std::size_t>(count, 1));
  if (t <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(t));
  for (int w = 0; w < t; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (std::size_t i = static_cast<std::size_t>(w); i < count;
             i += static_cast<std::size_t>(t))
          body(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void ExperimentSpec::validate(bool needs_gof) const {
  model.validate();
  if (sizes.empty()) throw std::invalid_argument("experiment: at least one size required");
  // strictly increasing in (volume, lexicographic) so that equal-volume
  // rectangles like (64,256) and (256,64) can share a ladder
  double prev_vol = 0.0;
  IndexVec prev_size;
  for (const auto& s : sizes) {
    if (s.size() != model.dim) throw std::invalid_argument("experiment: size dimension mismatch");
    double vol = 1.0;
    for (Index c : s) {
      if (c < 1) throw std::invalid_argument("experiment: sizes must be >= 1");
      vol *= static_cast<double>(c);
    }
    if (vol < prev_vol || (vol == prev_vol && !(prev_size < s)))
      throw std::invalid_argument("experiment: sizes must be strictly increasing");
    prev_vol = vol;
    prev_size = s;
  }
  if (needs_gof && replicates < 100)
    throw std::invalid_argument("experiment: goodness-of-fit verdicts need >= 100 replicates");
}

// --- sigma^2 -----------------------------------------------------------------

namespace {

double negative_mass(const InnovationSpec& innov) {
  switch (innov.kind) {
    case InnovationKind::kRademacher:
      return 0.5;
    case InnovationKind::kGaussian:
      return 0.5;
    case InnovationKind::kFinitePmf: {
      double p = 0.0;
      for (std::size_t i = 0; i < innov.values.size(); ++i)
        if (innov.values[i] < 0.0) p += innov.probs[i];
      return p;
    }
  }
  return 0.5;
}

}  // namespace

Sigma2Estimate estimate_sigma2(const FieldModel& model, std::size_t mc_reps, std::uint64_t seed) {
  model.validate();
  const double var = model.innovation.variance();
  if (std::holds_alternative<IidSpec>(model.variant)) return {var, "exact", 0.0};
  if (const auto* lin = std::get_if<LinearSpec>(&model.variant))
    return {var * lin->kernel.sum_sq(), "exact", 0.0};
  if (const auto* vol = std::get_if<VolterraSpec>(&model.variant)) {
    double s = 0.0;
    for (const auto& [uv, a] : vol->coeffs.coeffs) {
      const auto sym = vol->coeffs.coeffs.find({uv.second, uv.first});
      s += a * (a + (sym == vol->coeffs.coeffs.end() ? 0.0 : sym->second));
    }
    return {s * var * var, "exact", 0.0};
  }
  if (const auto* po = std::get_if<ProductOmdSpec>(&model.variant)) {
    const double p = negative_mass(model.innovation);
    return {var * (p * po->u_low + (1.0 - p) * po->u_high), "exact", 0.0};
  }
  if (const auto* uf = std::get_if<UFieldSpec>(&model.variant))
    return {var * u_mean(uf->n_max), "exact", 0.0};

  // coboundary: exact enumeration of the origin functional when the pmf is
  // finite and small enough, plain MC otherwise
  if (model.innovation.finite_support()) {
    try {
      const auto f = model_functional(model);
      FootprintFunctional sq;
      sq.footprint = f.footprint;
      sq.innovation = f.innovation;
      sq.eval = [f](const std::vector<double>& v) {
        const double x = f.eval(v);
        return x * x;
      };
      const QuadrantSigma nothing{IndexVec(model.dim, std::numeric_limits<Index>::min())};
      return {cond_exp(sq, nothing, {}), "exact", 0.0};
    } catch (const CapacityError&) {
      // fall through to MC
    }
  }
  double sum = 0.0, sumsq = 0.0;
  const IndexVec one(model.dim, 1);
  for (std::size_t r = 0; r < mc_reps; ++r) {
    const Rect box(one, IndexVec(model.dim, 2));
    const Rect window = required_window(model, box);
    const auto lattice = sample_innovations(window, model.innovation, seed, r);
    const double x = eval_field(model, lattice, one);
    sum += x * x;
    sumsq += x * x * x * x;
  }
  const double n = static_cast<double>(mc_reps);
  const double mean = sum / n;
  const double v = std::max(0.0, (sumsq - n * mean * mean) / (n - 1.0));
  return {mean, "mc", std::sqrt(v / n)};
}

double lattice_gap(const FieldModel& model, const IndexVec& size) {
  double vol = 1.0;
  for (Index c : size) vol *= static_cast<double>(c);
  const bool rademacher = model.innovation.kind == InnovationKind::kRademacher;
  if (!rademacher) return 0.0;
  double spacing = 0.0, sigma2 = 0.0;
  if (std::holds_alternative<IidSpec>(model.variant)) {
    spacing = 2.0;
    sigma2 = 1.0;
  } else if (const auto* po = std::get_if<ProductOmdSpec>(&model.variant)) {
    const double a = std::sqrt(po->u_low), b = std::sqrt(po->u_high);
    if (a != std::floor(a) || b != std::floor(b)) return 0.0;
    spacing = std::gcd(static_cast<long>(a), static_cast<long>(b));
    sigma2 = (po->u_low + po->u_high) / 2.0;
  } else {
    return 0.0;
  }
  return spacing / std::sqrt(2.0 * 3.14159265358979323846 * sigma2 * vol);
}

// --- partial-sum sampling -----------------------------------------------------

double replicate_sum(const FieldModel& model, const IndexVec& size, std::uint64_t base_seed,
                     std::uint64_t replicate, const std::optional<std::uint64_t>& frozen_seed) {
  const std::size_t d = model.dim;
  const Rect box(IndexVec(d, 1), add(size, IndexVec(d, 1)));
  const Rect window = required_window(model, box);
  std::optional<FrozenPast> frozen;
  if (frozen_seed) frozen = FrozenPast{IndexVec(d, 0), *frozen_seed};
  const auto lattice = sample_innovations(window, model.innovation, base_seed, replicate, frozen);
  double sum = 0.0, comp = 0.0;
  for_each_point(box, [&](const IndexVec& k) {
    const double y = eval_field(model, lattice, k) - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  });
  double vol = 1.0;
  for (Index c : size) vol *= static_cast<double>(c);
  return sum / std::sqrt(vol);
}

namespace {

CLTResult run_clt(const ExperimentSpec& spec, bool quenched) {
  spec.validate();
  if (quenched) {
    if (spec.frozen_seeds.empty())
      throw std::invalid_argument("quenched run: at least one frozen-past seed required");
    if (!is_structural_omd(spec.model) && !spec.acknowledge_non_omd)
      throw std::invalid_argument(
          "quenched run: model is not a structural orthomartingale difference; "
          "set acknowledge_non_omd to proceed");
  }
  const auto t0 = std::chrono::steady_clock::now();
  CLTResult result;
  result.sigma2 = estimate_sigma2(spec.model);
  std::vector<std::optional<std::uint64_t>> pasts;
  if (quenched)
    for (std::uint64_t s : spec.frozen_seeds) pasts.emplace_back(s);
  else
    pasts.emplace_back(std::nullopt);

  for (const auto& past : pasts) {
    for (const IndexVec& size : spec.sizes) {
      std::vector<double> samples(spec.replicates);
      parallel_for(spec.replicates, spec.threads, [&](std::size_t r) {
        samples[r] = replicate_sum(spec.model, size, spec.base_seed, r, past);
      });
      CLTCell cell;
      cell.frozen_seed = past;
      cell.size = size;
      cell.dist = EmpiricalDistribution::from_samples(std::move(samples));
      if (result.sigma2.value > 0.0) {
        cell.gof = gof_stats(cell.dist, result.sigma2.value, lattice_gap(spec.model, size));
      } else {
        cell.gof.ks = 1.0;
        cell.gof.dkw = dkw_band(cell.dist.count());
        cell.gof.threshold = 0.03;
        cell.gof.pass = false;  // degenerate sigma^2 short-circuit
      }
      result.all_pass = result.all_pass && cell.gof.pass;
      result.cells.push_back(std::move(cell));
    }
  }
  result.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace

CLTResult run_quenched_clt(const ExperimentSpec& spec) { return run_clt(spec, true); }
CLTResult run_annealed_clt(const ExperimentSpec& spec) { return run_clt(spec, false); }

// --- functional CLT -----------------------------------------------------------

void UnitRational::validate() const {
  if (den <= 0 || num < 0 || num > den)
    throw std::invalid_argument("partition points must be rationals in [0,1]");
}

namespace {

void validate_partition(const std::vector<UnitRational>& p) {
  if (p.empty()) throw std::invalid_argument("fdd: empty partition");
  double prev = 0.0;
  for (const auto& r : p) {
    r.validate();
    if (r.value() <= prev) throw std::invalid_argument("fdd: partition must be increasing from 0");
    prev = r.value();
  }
  if (p.back().num != p.back().den) throw std::invalid_argument("fdd: partition must end at 1");
}

}  // namespace

FunctionalReport run_functional_fdd(const ExperimentSpec& spec, const FddSpec& fdd,
                                    double rel_tol) {
  spec.validate();
  if (spec.model.dim != 2) throw std::invalid_argument("fdd: two-dimensional fields only");
  validate_partition(fdd.t_partition);
  validate_partition(fdd.s_partition);
  const std::size_t K = fdd.t_partition.size(), L = fdd.s_partition.size();
  if (fdd.coeffs.size() != K)
    throw std::invalid_argument("fdd: coefficient rows must match the t partition");
  for (const auto& row : fdd.coeffs)
    if (row.size() != L) throw std::invalid_argument("fdd: coefficient columns mismatch");

  const IndexVec size = spec.sizes.back();
  const Index n = size[0], v = size[1];
  const double vol = static_cast<double>(n) * static_cast<double>(v);
  // lattice positions of the partition points
  std::vector<Index> tn(K), sv(L);
  for (std::size_t k = 0; k < K; ++k)
    tn[k] = static_cast<Index>(n * fdd.t_partition[k].num / fdd.t_partition[k].den);
  for (std::size_t l = 0; l < L; ++l)
    sv[l] = static_cast<Index>(v * fdd.s_partition[l].num / fdd.s_partition[l].den);

  const std::size_t g = K * L;
  std::vector<double> w(spec.replicates * g);
  std::vector<double> combo(spec.replicates);
  const Rect box(IndexVec{1, 1}, IndexVec{n + 1, v + 1});
  parallel_for(spec.replicates, spec.threads, [&](std::size_t r) {
    const Rect window = required_window(spec.model, box);
    const auto lattice =
        sample_innovations(window, spec.model.innovation, spec.base_seed, r,
                           spec.frozen_seeds.empty()
                               ? std::optional<FrozenPast>{}
                               : FrozenPast{IndexVec{0, 0}, spec.frozen_seeds.front()});
    const auto field = field_window(spec.model, lattice, box);
    const auto table = PrefixSumTable::build(field);
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t l = 0; l < L; ++l)
        w[r * g + k * L + l] =
            table.rect_sum(Rect(IndexVec{1, 1}, IndexVec{tn[k] + 1, sv[l] + 1})) / std::sqrt(vol);
    double c = 0.0;
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t l = 0; l < L; ++l) {
        const Index t0 = k == 0 ? 0 : tn[k - 1], s0 = l == 0 ? 0 : sv[l - 1];
        c += fdd.coeffs[k][l] *
             table.rect_sum(Rect(IndexVec{t0 + 1, s0 + 1}, IndexVec{tn[k] + 1, sv[l] + 1}));
      }
    combo[r] = c / std::sqrt(vol);
  });

  FunctionalReport rep;
  rep.sigma2 = estimate_sigma2(spec.model).value;
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t l = 0; l < L; ++l)
      rep.grid.emplace_back(fdd.t_partition[k].value(), fdd.s_partition[l].value());

  const double nn = static_cast<double>(spec.replicates);
  std::vector<double> means(g, 0.0);
  for (std::size_t r = 0; r < spec.replicates; ++r)
    for (std::size_t i = 0; i < g; ++i) means[i] += w[r * g + i];
  for (auto& m : means) m /= nn;
  rep.emp_cov.assign(g, std::vector<double>(g, 0.0));
  rep.sheet_cov.assign(g, std::vector<double>(g, 0.0));
  for (std::size_t r = 0; r < spec.replicates; ++r)
    for (std::size_t i = 0; i < g; ++i)
      for (std::size_t j = i; j < g; ++j)
        rep.emp_cov[i][j] += (w[r * g + i] - means[i]) * (w[r * g + j] - means[j]);
  for (std::size_t i = 0; i < g; ++i)
    for (std::size_t j = i; j < g; ++j) {
      rep.emp_cov[i][j] /= nn - 1.0;
      rep.emp_cov[j][i] = rep.emp_cov[i][j];
      const auto [ti, si] = rep.grid[i];
      const auto [tj, sj] = rep.grid[j];
      rep.sheet_cov[i][j] = rep.sheet_cov[j][i] =
          rep.sigma2 * std::min(ti, tj) * std::min(si, sj);
      const double err = std::abs(rep.emp_cov[i][j] - rep.sheet_cov[i][j]) / rep.sheet_cov[i][j];
      rep.max_cov_rel_err = std::max(rep.max_cov_rel_err, err);
    }

  double cm = 0.0;
  for (double c : combo) cm += c;
  cm /= nn;
  double cv = 0.0;
  for (double c : combo) cv += (c - cm) * (c - cm);
  rep.fdd_variance = cv / (nn - 1.0);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t l = 0; l < L; ++l) {
      const double dt = fdd.t_partition[k].value() - (k == 0 ? 0.0 : fdd.t_partition[k - 1].value());
      const double ds = fdd.s_partition[l].value() - (l == 0 ? 0.0 : fdd.s_partition[l - 1].value());
      rep.gamma += rep.sigma2 * fdd.coeffs[k][l] * fdd.coeffs[k][l] * dt * ds;
    }
  rep.fdd_rel_err = std::abs(rep.fdd_variance - rep.gamma) / rep.gamma;
  rep.pass = rep.max_cov_rel_err <= rel_tol && rep.fdd_rel_err <= rel_tol;
  return rep;
}

// --- tightness probe ----------------------------------------------------------

TightnessReport tightness_moment_probe(const ExperimentSpec& spec,
                                       const std::vector<std::pair<Rect, Rect>>& rect_pairs) {
  spec.validate();
  const auto bound = field_bound(spec.model);
  if (!bound) throw std::logic_error("tightness probe: model must be bounded");
  const IndexVec size = spec.sizes.back();
  const std::size_t d = spec.model.dim;
  const Rect box(IndexVec(d, 1), add(size, IndexVec(d, 1)));
  double vol = 1.0;
  for (Index c : size) vol *= static_cast<double>(c);
  for (const auto& [a, b] : rect_pairs)
    if (!box.contains_rect(a) || !box.contains_rect(b))
      throw std::invalid_argument("tightness probe: rectangle outside the sampling box");

  const std::size_t p = rect_pairs.size();
  std::vector<double> acc4a(spec.replicates * p), acc4b(spec.replicates * p),
      accx(spec.replicates * p);
  parallel_for(spec.replicates, spec.threads, [&](std::size_t r) {
    const auto lattice = sample_innovations(required_window(spec.model, box),
                                            spec.model.innovation, spec.base_seed, r);
    const auto table = PrefixSumTable::build(field_window(spec.model, lattice, box));
    for (std::size_t i = 0; i < p; ++i) {
      const double da = table.rect_sum(rect_pairs[i].first) / std::sqrt(vol);
      const double db = table.rect_sum(rect_pairs[i].second) / std::sqrt(vol);
      acc4a[r * p + i] = da * da * da * da;
      acc4b[r * p + i] = db * db * db * db;
      accx[r * p + i] = da * da * db * db;
    }
  });

  TightnessReport rep;
  rep.bound_c = *bound;
  const double nn = static_cast<double>(spec.replicates);
  for (std::size_t i = 0; i < p; ++i) {
    TightnessEntry e;
    e.a = rect_pairs[i].first;
    e.b = rect_pairs[i].second;
    const double mua = static_cast<double>(e.a.volume()) / vol;
    const double mub = static_cast<double>(e.b.volume()) / vol;
    double m4a = 0.0, m4b = 0.0, mx = 0.0;
    for (std::size_t r = 0; r < spec.replicates; ++r) {
      m4a += acc4a[r * p + i];
      m4b += acc4b[r * p + i];
      mx += accx[r * p + i];
    }
    e.ratio4_a = mua > 0.0 ? (m4a / nn) / (mua * mua) : 0.0;
    e.ratio4_b = mub > 0.0 ? (m4b / nn) / (mub * mub) : 0.0;
    e.cross_ratio = mua > 0.0 && mub > 0.0 ? (mx / nn) / (mua * mub) : 0.0;
    rep.max_ratio = std::max({rep.max_ratio, e.ratio4_a, e.ratio4_b, e.cross_ratio});
    rep.entries.push_back(e);
  }
  return rep;
}

// --- Gordin-Hannan style array conditions -------------------------------------

GhReport gh_check(const ExperimentSpec& spec, const std::vector<double>& qs) {
  spec.validate(false);
  if (spec.replicates < 2) throw std::invalid_argument("gh_check: reps must be >= 2");
  GhReport rep;
  rep.sigma2 = estimate_sigma2(spec.model).value;
  const std::size_t d = spec.model.dim;
  const std::optional<std::uint64_t> past =
      spec.frozen_seeds.empty() ? std::optional<std::uint64_t>{} : spec.frozen_seeds.front();

  for (const IndexVec& size : spec.sizes) {
    const Index n = size[0];
    double rest_vol = 1.0;
    for (std::size_t i = 1; i < d; ++i) rest_vol *= static_cast<double>(size[i]);
    const Rect box(IndexVec(d, 1), add(size, IndexVec(d, 1)));

    // per-replicate, per-q |sum (F^2 - sigma2)| and max F^2
    std::vector<double> lim(spec.replicates * qs.size());
    std::vector<double> mx(spec.replicates);
    parallel_for(spec.replicates, spec.threads, [&](std::size_t r) {
      std::optional<FrozenPast> frozen;
      if (past) frozen = FrozenPast{IndexVec(d, 0), *past};
      const auto lattice = sample_innovations(required_window(spec.model, box),
                                              spec.model.innovation, spec.base_seed, r, frozen);
      std::vector<double> f2(static_cast<std::size_t>(n), 0.0);
      for_each_point(box, [&](const IndexVec& k) {
        f2[static_cast<std::size_t>(k[0] - 1)] += eval_field(spec.model, lattice, k);
      });
      double fmax = 0.0;
      for (auto& f : f2) {
        f = f * f / rest_vol;
        fmax = std::max(fmax, f);
      }
      mx[r] = fmax / static_cast<double>(n);
      for (std::size_t iq = 0; iq < qs.size(); ++iq) {
        const auto rows =
            static_cast<std::size_t>(std::floor(static_cast<double>(n - 1) * qs[iq])) + 1;
        double s = 0.0;
        for (std::size_t i = 0; i < rows; ++i) s += f2[i] - rep.sigma2;
        lim[r * qs.size() + iq] = std::abs(s) / static_cast<double>(n);
      }
    });

    const double nn = static_cast<double>(spec.replicates);
    for (std::size_t iq = 0; iq < qs.size(); ++iq) {
      GhEntry e;
      e.size = size;
      e.q = qs[iq];
      double s = 0.0, ss = 0.0;
      for (std::size_t r = 0; r < spec.replicates; ++r) {
        const double x = lim[r * qs.size() + iq];
        s += x;
        ss += x * x;
      }
      e.limit_stat = s / nn;
      e.limit_se = std::sqrt(std::max(0.0, (ss - nn * e.limit_stat * e.limit_stat) / (nn - 1.0)) / nn);
      double ms = 0.0, mss = 0.0;
      for (double x : mx) {
        ms += x;
        mss += x * x;
      }
      e.max_stat = ms / nn;
      e.max_se = std::sqrt(std::max(0.0, (mss - nn * e.max_stat * e.max_stat) / (nn - 1.0)) / nn);
      rep.entries.push_back(e);
    }
  }

  for (std::size_t iq = 0; iq < qs.size(); ++iq) {
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& e : rep.entries)
      if (e.q == qs[iq]) {
        if (e.limit_stat > prev) rep.limit_decreasing = false;
        prev = e.limit_stat;
      }
  }
  return rep;
}

// --- coboundary residuals -----------------------------------------------------

CoboundaryReport coboundary_residuals(const ExperimentSpec& spec) {
  spec.validate(false);
  const auto* cb = std::get_if<CoboundarySpec>(&spec.model.variant);
  if (!cb) throw std::invalid_argument("coboundary_residuals: model must be a coboundary spec");
  if (spec.replicates < 2) throw std::invalid_argument("coboundary_residuals: reps >= 2");

  CoboundaryReport rep;
  for (const IndexVec& size : spec.sizes) {
    const Index n = size[0], v = size[1];
    const double root = std::sqrt(static_cast<double>(n) * static_cast<double>(v));
    // components are evaluated one row/column past the box for the telescopes
    const Rect ext(IndexVec{1, 1}, IndexVec{n + 2, v + 2});
    Rect window = required_window(spec.model, ext);
    for (const auto& part : {cb->m, cb->m_prime, cb->m_dprime, cb->y})
      if (part) {
        const Rect w = required_window(*part, ext);
        for (std::size_t i = 0; i < 2; ++i) {
          window.lo[i] = std::min(window.lo[i], w.lo[i]);
          window.hi[i] = std::max(window.hi[i], w.hi[i]);
        }
      }

    std::vector<double> res(spec.replicates), r1(spec.replicates), r2(spec.replicates),
        r3(spec.replicates);
    std::vector<char> r3_ok(spec.replicates, 1);
    const auto ybound = cb->y ? field_bound(*cb->y) : std::optional<double>(0.0);
    parallel_for(spec.replicates, spec.threads, [&](std::size_t r) {
      std::optional<FrozenPast> frozen;
      if (!spec.frozen_seeds.empty()) frozen = FrozenPast{IndexVec{0, 0}, spec.frozen_seeds.front()};
      const auto lattice =
          sample_innovations(window, spec.model.innovation, spec.base_seed, r, frozen);
      const Rect box(IndexVec{1, 1}, IndexVec{n + 1, v + 1});
      const auto s_table = PrefixSumTable::build(field_window(spec.model, lattice, box));
      std::optional<PrefixSumTable> m_table;
      if (cb->m) m_table = PrefixSumTable::build(field_window(*cb->m, lattice, box));
      auto part_at = [&](const std::shared_ptr<const FieldModel>& part, Index i, Index j) {
        return part ? eval_field(*part, lattice, IndexVec{i, j}) : 0.0;
      };
      // column-cumulative m' rows and row-cumulative m'' columns
      std::vector<double> mp_row1(static_cast<std::size_t>(v) + 1, 0.0);
      std::vector<std::vector<double>> mp_rows;  // rows 2..n+1 cumulated in j
      for (Index j = 1; j <= v; ++j)
        mp_row1[static_cast<std::size_t>(j)] =
            mp_row1[static_cast<std::size_t>(j - 1)] + part_at(cb->m_prime, 1, j);
      double rmax = 0.0, r1max = 0.0, r2max = 0.0, r3max = 0.0;
      std::vector<double> mpp_col1(static_cast<std::size_t>(n) + 1, 0.0);
      for (Index i = 1; i <= n; ++i)
        mpp_col1[static_cast<std::size_t>(i)] =
            mpp_col1[static_cast<std::size_t>(i - 1)] + part_at(cb->m_dprime, i, 1);
      for (Index k = 1; k <= n; ++k) {
        // cumulative row k+1 of m' along j, and column l+1 of m'' along i is
        // rebuilt per k/l as needed
        double mp_cum = 0.0;
        for (Index l = 1; l <= v; ++l) {
          mp_cum += part_at(cb->m_prime, k + 1, l);
          const double s = s_table.rect_sum(Rect(IndexVec{1, 1}, IndexVec{k + 1, l + 1}));
          const double m =
              m_table ? m_table->rect_sum(Rect(IndexVec{1, 1}, IndexVec{k + 1, l + 1})) : 0.0;
          const double resid = std::abs(s - m) / root;
          rmax = std::max(rmax, resid);
          const double rr1 = std::abs(mp_row1[static_cast<std::size_t>(l)] - mp_cum) / root;
          r1max = std::max(r1max, rr1);
          const double rr3 = std::abs(part_at(cb->y, 1, 1) - part_at(cb->y, k + 1, 1) -
                                      part_at(cb->y, 1, l + 1) + part_at(cb->y, k + 1, l + 1)) /
                             root;
          r3max = std::max(r3max, rr3);
        }
      }
      for (Index l = 1; l <= v; ++l) {
        double mpp_cum = 0.0;
        for (Index k = 1; k <= n; ++k) {
          mpp_cum += part_at(cb->m_dprime, k, l + 1);
          const double rr2 = std::abs(mpp_col1[static_cast<std::size_t>(k)] - mpp_cum) / root;
          r2max = std::max(r2max, rr2);
        }
      }
      res[r] = rmax;
      r1[r] = r1max;
      r2[r] = r2max;
      r3[r] = r3max;
      if (ybound && r3max > 4.0 * *ybound / root + 1e-12) r3_ok[r] = 0;
    });

    CoboundaryEntry e;
    e.size = size;
    std::vector<double> sorted = res;
    std::sort(sorted.begin(), sorted.end());
    e.median = sorted[sorted.size() / 2];
    e.p90 = sorted[(sorted.size() * 9) / 10];
    e.max = sorted.back();
    e.r1_max = *std::max_element(r1.begin(), r1.end());
    e.r2_max = *std::max_element(r2.begin(), r2.end());
    e.r3_max = *std::max_element(r3.begin(), r3.end());
    e.r3_bound = ybound ? 4.0 * *ybound / root : 0.0;
    e.r3_within_bound = std::all_of(r3_ok.begin(), r3_ok.end(), [](char c) { return c != 0; });
    rep.entries.push_back(e);
  }
  for (std::size_t i = 0; i + 1 < rep.entries.size(); ++i)
    rep.decay_ratios.push_back(rep.entries[i].median /
                               std::max(rep.entries[i + 1].median, 1e-300));
  return rep;
}

// --- counterexample probe -----------------------------------------------------

CounterexampleReport counterexample_probe(const UFieldSpec& u_spec,
                                          const std::vector<long long>& window_ladder,
                                          const std::vector<double>& budgets,
                                          double control_u_max, std::size_t cell_check_reps,
                                          std::uint64_t seed, int threads) {
  CounterexampleReport rep;
  for (double b : budgets)
    if (!(b > 0.0)) throw std::invalid_argument("counterexample probe: budgets must be > 0");

  for (long long N : window_ladder) {
    const long long m = static_cast<long long>(std::ceil(std::log(static_cast<double>(N))));
    if (m >= N) throw std::invalid_argument("counterexample probe: window is empty");
    for (double b : budgets) {
      CounterexampleEntry e;
      e.window_n = N;
      e.budget = b;
      const std::size_t rows = static_cast<std::size_t>(N - m);
      std::vector<double> row_count(rows, 0.0), row_logmiss(rows, 0.0), row_control(rows, 0.0);
      parallel_for(rows, threads, [&](std::size_t ri) {
        const long long i = m + static_cast<long long>(ri);
        double count = 0.0, logmiss = 0.0, control = 0.0;
        for (long long j = m; j < N; ++j) {
          const double t = b * static_cast<double>(i) * static_cast<double>(j);
          count += u_tail_sum(t);
          const double q = u_tail_prob_capped(t, u_spec.n_max);
          logmiss += std::log1p(-q);
          if (control_u_max >= t) control += 1.0;
        }
        row_count[ri] = count;
        row_logmiss[ri] = logmiss;
        row_control[ri] = control;
      });
      for (std::size_t ri = 0; ri < rows; ++ri) {
        e.expected_count += row_count[ri];
        e.control_expected += row_control[ri];
      }
      double logmiss = 0.0;
      for (double x : row_logmiss) logmiss += x;
      e.prob_exceed = -std::expm1(logmiss);
      rep.entries.push_back(e);
    }
  }

  for (double b : budgets) {
    std::vector<double> counts;
    for (const auto& e : rep.entries)
      if (e.budget == b) counts.push_back(e.expected_count);
    for (std::size_t i = 0; i + 1 < counts.size(); ++i)
      rep.count_ratios.emplace_back(b, counts[i + 1] / std::max(counts[i], 1e-300));
  }

  // analytic-vs-MC spot check at the window corner cell of the smallest ladder
  if (cell_check_reps >= 2 && !window_ladder.empty() && !budgets.empty()) {
    const long long m =
        static_cast<long long>(std::ceil(std::log(static_cast<double>(window_ladder.front()))));
    const IndexVec cell{m, m};
    const double b = budgets.front();
    const double t = b * static_cast<double>(m) * static_cast<double>(m);
    CounterexampleCellCheck c;
    c.cell = cell;
    c.budget = b;
    c.reps = cell_check_reps;
    c.analytic = u_tail_prob_capped(t, u_spec.n_max);
    std::vector<char> hits(cell_check_reps, 0);
    const Rect window(cell, add(cell, IndexVec{1, 1}));
    parallel_for(cell_check_reps, threads, [&](std::size_t r) {
      const auto lattice = sample_innovations(window, InnovationSpec::rademacher(), seed, r);
      hits[r] = u_field_value(lattice, cell, u_spec.n_max) >= t ? 1 : 0;
    });
    double h = 0.0;
    for (char x : hits) h += x;
    c.mc = h / static_cast<double>(cell_check_reps);
    c.mc_se = std::sqrt(std::max(c.mc * (1.0 - c.mc), 1e-300) /
                        static_cast<double>(cell_check_reps));
    rep.cell_checks.push_back(c);
  }
  return rep;
}

// --- serialization ------------------------------------------------------------

namespace {

std::string fmt12(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

long long csv_n(const IndexVec& size) { return size.empty() ? 0 : size[0]; }

long long csv_v(const IndexVec& size) {
  long long v = 1;
  for (std::size_t i = 1; i < size.size(); ++i) v *= size[i];
  return v;
}

}  // namespace

std::string clt_csv(const CLTResult& result) {
  std::ostringstream out;
  out << "frozen_past_id,n,v,replicate_count,sigma2,ks,dkw,verdict\n";
  for (const auto& cell : result.cells) {
    if (cell.frozen_seed)
      out << *cell.frozen_seed;
    else
      out << -1;
    out << ',' << csv_n(cell.size) << ',' << csv_v(cell.size) << ',' << cell.dist.count() << ','
        << fmt12(result.sigma2.value) << ',' << fmt12(cell.gof.ks) << ',' << fmt12(cell.gof.dkw)
        << ',' << (cell.gof.pass ? "pass" : "fail") << '\n';
  }
  return out.str();
}

std::string clt_json(const CLTResult& result) {
  nlohmann::json j;
  j["sigma2"] = {{"value", result.sigma2.value},
                 {"method", result.sigma2.method},
                 {"error", result.sigma2.error}};
  j["runtime_seconds"] = result.runtime_seconds;
  j["all_pass"] = result.all_pass;
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& cell : result.cells) {
    nlohmann::json c;
    if (cell.frozen_seed)
      c["frozen_past_id"] = *cell.frozen_seed;
    else
      c["frozen_past_id"] = -1;
    c["size"] = cell.size;
    c["n"] = csv_n(cell.size);
    c["v"] = csv_v(cell.size);
    c["replicates"] = cell.dist.count();
    c["mean"] = cell.dist.mean;
    c["variance"] = cell.dist.variance;
    c["ks"] = cell.gof.ks;
    c["dkw"] = cell.gof.dkw;
    c["lattice_gap"] = cell.gof.lattice_gap;
    c["threshold"] = cell.gof.threshold;
    c["verdict"] = cell.gof.pass ? "pass" : "fail";
    cells.push_back(c);
  }
  j["cells"] = cells;
  return j.dump(2);
}

}  // namespace qfield
