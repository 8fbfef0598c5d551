#include "qfield/lattice.hpp"

#include <cmath>

namespace qfield {

PrefixSumTable PrefixSumTable::build(const NdArray& values) {
  const Rect& w = values.window();
  if (w.volume() == 0) throw std::invalid_argument("build_prefix_table: empty window");
  const std::size_t d = w.dim();

  PrefixSumTable t;
  t.window_ = w;
  t.ext_.resize(d);
  std::size_t total = 1;
  for (std::size_t i = 0; i < d; ++i) {
    t.ext_[i] = w.extent(i) + 1;
    total *= static_cast<std::size_t>(t.ext_[i]);
  }
  t.strides_.assign(d, 1);
  for (std::size_t axis = d; axis-- > 1;) t.strides_[axis - 1] = t.strides_[axis] * t.ext_[axis];
  t.cum_.assign(total, 0.0);

  // Copy raw values into the interior (ghost zeros on every lo face).
  {
    const auto& src = values.data();
    std::size_t si = 0;
    IndexVec p(d, 0);
    for_each_point(Rect(IndexVec(d, 0), [&] {
                     IndexVec e(d);
                     for (std::size_t i = 0; i < d; ++i) e[i] = w.extent(i);
                     return e;
                   }()),
                   [&](const IndexVec& q) {
                     std::size_t o = 0;
                     for (std::size_t i = 0; i < d; ++i)
                       o += static_cast<std::size_t>(q[i] + 1) * static_cast<std::size_t>(t.strides_[i]);
                     t.cum_[o] = src[si++];
                   });
  }

  // Running prefix along each axis. The innermost axis goes first and uses
  // compensated (Kahan) accumulation; windows can reach ~1e7 cells.
  for (std::size_t axis = d; axis-- > 0;) {
    const std::size_t stride = static_cast<std::size_t>(t.strides_[axis]);
    const std::size_t len = static_cast<std::size_t>(t.ext_[axis]);
    const std::size_t nlines = total / len;
    const bool innermost = (axis == d - 1);
    for (std::size_t line = 0; line < nlines; ++line) {
      // base offset of this line: expand `line` over the remaining axes
      std::size_t base = 0, rem = line;
      for (std::size_t ax = d; ax-- > 0;) {
        if (ax == axis) continue;
        const std::size_t e = static_cast<std::size_t>(t.ext_[ax]);
        base += (rem % e) * static_cast<std::size_t>(t.strides_[ax]);
        rem /= e;
      }
      if (innermost) {
        double run = 0.0, comp = 0.0;
        for (std::size_t k = 0; k < len; ++k) {
          const double y = t.cum_[base + k * stride] - comp;
          const double s = run + y;
          comp = (s - run) - y;
          run = s;
          t.cum_[base + k * stride] = run;
        }
      } else {
        double run = 0.0;
        for (std::size_t k = 0; k < len; ++k) {
          run += t.cum_[base + k * stride];
          t.cum_[base + k * stride] = run;
        }
      }
    }
  }
  return t;
}

double PrefixSumTable::corner(const IndexVec& p) const {
  std::size_t o = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Index rel = p[i] - window_.lo[i];
    if (rel < 0 || rel >= ext_[i])
      throw std::out_of_range("PrefixSumTable: corner " + to_string(p) + " outside window");
    o += static_cast<std::size_t>(rel) * static_cast<std::size_t>(strides_[i]);
  }
  return cum_[o];
}

double PrefixSumTable::rect_sum(const Rect& r) const {
  if (r.dim() != window_.dim()) throw std::invalid_argument("rect_sum: dimension mismatch");
  if (r.volume() == 0) return 0.0;
  if (!window_.contains_rect(r))
    throw std::out_of_range("rect_sum: rectangle outside window");
  const std::size_t d = r.dim();
  double sum = 0.0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
    IndexVec p(d);
    int lowered = 0;
    for (std::size_t i = 0; i < d; ++i) {
      if (mask & (std::size_t{1} << i)) {
        p[i] = r.lo[i];
        ++lowered;
      } else {
        p[i] = r.hi[i];
      }
    }
    sum += (lowered % 2 ? -1.0 : 1.0) * corner(p);
  }
  return sum;
}

ScaledPathGrid scaled_path(const PrefixSumTable& table, const IndexVec& sizes,
                           const std::vector<std::vector<double>>& grid) {
  const std::size_t d = table.window().dim();
  if (sizes.size() != d) throw std::invalid_argument("scaled_path: sizes dimension mismatch");
  double prod = 1.0;
  for (std::size_t i = 0; i < d; ++i) {
    if (sizes[i] < 1) throw std::invalid_argument("scaled_path: sizes must be >= 1");
    prod *= static_cast<double>(sizes[i]);
  }
  const double scale = std::sqrt(prod);

  ScaledPathGrid out;
  out.sizes = sizes;
  out.points = grid;
  out.values.reserve(grid.size());
  for (const auto& pt : grid) {
    if (pt.size() != d) throw std::invalid_argument("scaled_path: grid point dimension mismatch");
    IndexVec hi(d);
    bool empty = false;
    for (std::size_t i = 0; i < d; ++i) {
      if (pt[i] < 0.0 || pt[i] > 1.0)
        throw std::out_of_range("scaled_path: grid point outside [0,1]^d");
      const Index m = static_cast<Index>(std::floor(static_cast<double>(sizes[i]) * pt[i]));
      hi[i] = table.window().lo[i] + m;
      if (m == 0) empty = true;
    }
    if (empty) {
      out.values.push_back(0.0);
      continue;
    }
    out.values.push_back(table.rect_sum(Rect(table.window().lo, hi)) / scale);
  }
  return out;
}

double increment(const PrefixSumTable& table, const Rect& a, double scale) {
  return table.rect_sum(a) / scale;
}

}  // namespace qfield
