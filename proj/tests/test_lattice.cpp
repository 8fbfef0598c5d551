#include <random>

#include "doctest.h"
#include "qfield/lattice.hpp"

using namespace qfield;

namespace {

// independent naive oracle: direct loop over the rectangle
double naive_rect_sum(const NdArray& a, const Rect& r) {
  double s = 0.0;
  for_each_point(r, [&](const IndexVec& p) { s += a.at(p); });
  return s;
}

NdArray random_array(const Rect& window, std::uint32_t seed) {
  NdArray a(window);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (auto& v : a.data()) v = dist(rng);
  return a;
}

}  // namespace

TEST_CASE("rect basics") {
  const Rect r(IndexVec{-1, 2}, IndexVec{3, 5});
  CHECK(r.volume() == 12);
  CHECK(r.extent(0) == 4);
  CHECK(r.contains_point(IndexVec{-1, 2}));
  CHECK_FALSE(r.contains_point(IndexVec{3, 2}));  // half-open
  CHECK(r.contains_rect(Rect(IndexVec{0, 2}, IndexVec{3, 4})));
  CHECK_FALSE(r.contains_rect(Rect(IndexVec{0, 2}, IndexVec{4, 4})));
  // empty rects are contained anywhere
  CHECK(r.contains_rect(Rect(IndexVec{100, 100}, IndexVec{100, 100})));
  CHECK_THROWS_AS(Rect(IndexVec{1}, IndexVec{0}), std::invalid_argument);
}

TEST_CASE("for_each_point is row-major, last axis fastest") {
  std::vector<IndexVec> seen;
  for_each_point(Rect(IndexVec{0, 0}, IndexVec{2, 2}),
                 [&](const IndexVec& p) { seen.push_back(p); });
  REQUIRE(seen.size() == 4);
  CHECK(seen[0] == IndexVec{0, 0});
  CHECK(seen[1] == IndexVec{0, 1});
  CHECK(seen[2] == IndexVec{1, 0});
  CHECK(seen[3] == IndexVec{1, 1});
}

TEST_CASE("ndarray bounds") {
  NdArray a(Rect(IndexVec{1, 1}, IndexVec{3, 4}));
  a.at(IndexVec{2, 3}) = 5.0;
  CHECK(a.at(IndexVec{2, 3}) == 5.0);
  CHECK_THROWS_AS(a.at(IndexVec{3, 1}), std::out_of_range);
}

TEST_CASE("prefix sums match the naive oracle") {
  std::mt19937 rng(12345);
  for (std::size_t d = 1; d <= 3; ++d) {
    IndexVec lo(d), hi(d);
    for (std::size_t i = 0; i < d; ++i) {
      lo[i] = static_cast<Index>(rng() % 5) - 2;
      hi[i] = lo[i] + 3 + static_cast<Index>(rng() % 5);
    }
    const Rect window(lo, hi);
    const NdArray a = random_array(window, static_cast<std::uint32_t>(17 * d));
    const auto table = PrefixSumTable::build(a);
    for (int trial = 0; trial < 40; ++trial) {
      IndexVec rlo(d), rhi(d);
      for (std::size_t i = 0; i < d; ++i) {
        rlo[i] = lo[i] + static_cast<Index>(rng() % static_cast<unsigned>(window.extent(i)));
        rhi[i] = rlo[i] + static_cast<Index>(rng() % static_cast<unsigned>(hi[i] - rlo[i] + 1));
      }
      const Rect r(rlo, rhi);
      CHECK(table.rect_sum(r) == doctest::Approx(naive_rect_sum(a, r)).epsilon(1e-12));
    }
    // corner equals the cumulative sum from window.lo
    CHECK(table.corner(hi) == doctest::Approx(naive_rect_sum(a, window)).epsilon(1e-12));
    CHECK(table.corner(lo) == 0.0);
  }
}

TEST_CASE("rect_sum additivity over a split") {
  const Rect window(IndexVec{0, 0}, IndexVec{8, 8});
  const NdArray a = random_array(window, 99);
  const auto table = PrefixSumTable::build(a);
  const Rect whole(IndexVec{1, 1}, IndexVec{7, 6});
  const Rect left(IndexVec{1, 1}, IndexVec{4, 6});
  const Rect right(IndexVec{4, 1}, IndexVec{7, 6});
  CHECK(table.rect_sum(whole) ==
        doctest::Approx(table.rect_sum(left) + table.rect_sum(right)).epsilon(1e-12));
}

TEST_CASE("scaled path and increments") {
  const Rect window(IndexVec{1, 1}, IndexVec{5, 5});
  NdArray a(window, 1.0);  // all-ones field, 4x4
  const auto table = PrefixSumTable::build(a);
  const IndexVec sizes{4, 4};
  const auto grid = scaled_path(table, sizes, {{0.5, 0.5}, {1.0, 1.0}, {0.0, 1.0}});
  REQUIRE(grid.values.size() == 3);
  CHECK(grid.values[0] == doctest::Approx(4.0 / 4.0));   // S_{2,2}/sqrt(16)
  CHECK(grid.values[1] == doctest::Approx(16.0 / 4.0));
  CHECK(grid.values[2] == 0.0);
  CHECK_THROWS_AS(scaled_path(table, sizes, {{1.5, 0.0}}), std::out_of_range);
  CHECK(increment(table, Rect(IndexVec{2, 2}, IndexVec{4, 4}), 4.0) == doctest::Approx(1.0));
}

TEST_CASE("index vector helpers") {
  CHECK(leq(IndexVec{1, 2}, IndexVec{1, 3}));
  CHECK_FALSE(leq(IndexVec{2, 2}, IndexVec{1, 3}));
  CHECK(leq(IndexVec{5, 5}, IndexVec{kNoBound, 5}));
  CHECK(meet(IndexVec{1, 4}, IndexVec{2, 3}) == IndexVec{1, 3});
  CHECK(to_string(IndexVec{1, kNoBound}) == "(1,inf)");
}
