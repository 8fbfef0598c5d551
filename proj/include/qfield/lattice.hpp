#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace qfield {

using Index = std::int64_t;

/// Lattice point in Z^d. Partial order is coordinatewise.
using IndexVec = std::vector<Index>;

/// Sentinel used as an anchor coordinate meaning "no constraint on this axis"
/// (half-plane sigma-fields).
inline constexpr Index kNoBound = INT64_MAX;

inline bool leq(const IndexVec& a, const IndexVec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("leq: dimension mismatch");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] > b[i]) return false;
  return true;
}

inline IndexVec meet(const IndexVec& a, const IndexVec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("meet: dimension mismatch");
  IndexVec m(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) m[i] = a[i] < b[i] ? a[i] : b[i];
  return m;
}

inline IndexVec add(const IndexVec& a, const IndexVec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("add: dimension mismatch");
  IndexVec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

inline IndexVec sub(const IndexVec& a, const IndexVec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("sub: dimension mismatch");
  IndexVec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

inline std::string to_string(const IndexVec& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += (v[i] == kNoBound) ? std::string("inf") : std::to_string(v[i]);
  }
  return s + ")";
}

/// Half-open box {k : lo <= k < hi}.
struct Rect {
  IndexVec lo;
  IndexVec hi;

  Rect() = default;
  Rect(IndexVec l, IndexVec h) : lo(std::move(l)), hi(std::move(h)) {
    if (lo.size() != hi.size()) throw std::invalid_argument("Rect: dimension mismatch");
    for (std::size_t i = 0; i < lo.size(); ++i)
      if (lo[i] > hi[i]) throw std::invalid_argument("Rect: lo > hi on axis " + std::to_string(i));
  }

  std::size_t dim() const { return lo.size(); }

  Index extent(std::size_t axis) const { return hi[axis] - lo[axis]; }

  Index volume() const {
    Index v = 1;
    for (std::size_t i = 0; i < lo.size(); ++i) v *= extent(i);
    return v;
  }

  bool contains_point(const IndexVec& p) const {
    for (std::size_t i = 0; i < lo.size(); ++i)
      if (p[i] < lo[i] || p[i] >= hi[i]) return false;
    return true;
  }

  bool contains_rect(const Rect& r) const {
    // an empty rect is contained anywhere
    if (r.volume() == 0) return true;
    return leq(lo, r.lo) && leq(r.hi, hi);
  }
};

/// Visits every lattice point of `r` in row-major order (last axis fastest).
template <typename F>
void for_each_point(const Rect& r, F&& f) {
  if (r.volume() == 0) return;
  IndexVec p = r.lo;
  const std::size_t d = r.dim();
  while (true) {
    f(static_cast<const IndexVec&>(p));
    std::size_t axis = d;
    while (axis > 0) {
      --axis;
      if (++p[axis] < r.hi[axis]) break;
      p[axis] = r.lo[axis];
      if (axis == 0) return;
    }
  }
}

/// Dense d-dimensional array of doubles anchored at window.lo, row-major.
class NdArray {
 public:
  NdArray() = default;
  explicit NdArray(Rect window, double fill = 0.0)
      : window_(std::move(window)), data_(static_cast<std::size_t>(window_.volume()), fill) {
    strides_.assign(window_.dim(), 1);
    for (std::size_t axis = window_.dim(); axis-- > 1;)
      strides_[axis - 1] = strides_[axis] * window_.extent(axis);
  }

  const Rect& window() const { return window_; }
  std::size_t size() const { return data_.size(); }
  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  std::size_t offset(const IndexVec& p) const {
    std::size_t o = 0;
    for (std::size_t i = 0; i < strides_.size(); ++i)
      o += static_cast<std::size_t>(p[i] - window_.lo[i]) * static_cast<std::size_t>(strides_[i]);
    return o;
  }

  double at(const IndexVec& p) const {
    if (!window_.contains_point(p))
      throw std::out_of_range("NdArray: point " + to_string(p) + " outside window");
    return data_[offset(p)];
  }
  double& at(const IndexVec& p) {
    if (!window_.contains_point(p))
      throw std::out_of_range("NdArray: point " + to_string(p) + " outside window");
    return data_[offset(p)];
  }

 private:
  Rect window_;
  std::vector<Index> strides_;
  std::vector<double> data_;
};

/// Summed-area table over a rectangular window. Any rectangular sum is
/// answered by inclusion-exclusion over the 2^d corners.
class PrefixSumTable {
 public:
  static PrefixSumTable build(const NdArray& values);

  const Rect& window() const { return window_; }

  /// Sum of raw values over r (half-open). r must lie inside the window.
  double rect_sum(const Rect& r) const;

  /// Cumulative sum over [window.lo, p), p coordinatewise in [lo, hi].
  double corner(const IndexVec& p) const;

 private:
  Rect window_;
  std::vector<Index> ext_;      // extent + 1 per axis (ghost zero layer at lo)
  std::vector<Index> strides_;
  std::vector<double> cum_;
};

/// Values of the normalized partial-sum process on points of [0,1]^d.
struct ScaledPathGrid {
  IndexVec sizes;                           // (n, v, ...) declared for the path
  std::vector<std::vector<double>> points;  // each point in [0,1]^d
  std::vector<double> values;               // S_{[n t]} / sqrt(prod sizes)
};

/// W(t) = S_{[n1 t1],...,[nd td]} / sqrt(n1*...*nd), anchored at table.window().lo.
ScaledPathGrid scaled_path(const PrefixSumTable& table, const IndexVec& sizes,
                           const std::vector<std::vector<double>>& grid);

/// Increment of the normalized process over an index rectangle: rect_sum(A)/scale.
double increment(const PrefixSumTable& table, const Rect& a, double scale);

}  // namespace qfield
