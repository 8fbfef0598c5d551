#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "qfield/lattice.hpp"
#include "qfield/rng.hpp"

namespace qfield {

enum class InnovationKind { kRademacher, kFinitePmf, kGaussian };

/// Distribution of the i.i.d. innovation field. All kinds are centered.
struct InnovationSpec {
  InnovationKind kind = InnovationKind::kRademacher;
  std::vector<double> values;  // finite-pmf support
  std::vector<double> probs;   // finite-pmf weights, sum to 1
  double var = 1.0;            // gaussian variance

  static InnovationSpec rademacher() { return {}; }
  static InnovationSpec gaussian(double var);
  static InnovationSpec finite_pmf(std::vector<double> values, std::vector<double> probs);

  void validate() const;
  double variance() const;
  bool finite_support() const { return kind != InnovationKind::kGaussian; }

  double draw(std::uint64_t key) const;
};

/// A frozen past: innovations on the closed lower-left quadrant {u <= anchor}
/// are pinned to the stream derived from past_seed and reproduced bit-identically
/// across replicates; everything else is redrawn per replicate.
struct FrozenPast {
  IndexVec anchor;         // usually the all-zeros vector
  std::uint64_t past_seed; // dedicated seed, never reused as a replicate seed
};

/// Realized innovations on a finite window, plus the stream bookkeeping needed
/// to evaluate auxiliary randomness (U-field level events) on the fly.
struct InnovationLattice {
  Rect window;
  NdArray values;
  std::uint64_t base_seed = 0;
  std::uint64_t replicate_id = 0;
  std::uint64_t rep_stream = 0;           // innovations, this replicate
  std::uint64_t rep_level_stream = 0;     // level events, this replicate
  std::uint64_t frozen_stream = 0;        // innovations on the frozen quadrant
  std::uint64_t frozen_level_stream = 0;  // level events on the frozen quadrant
  std::optional<IndexVec> frozen_anchor;

  bool is_frozen(const IndexVec& cell) const {
    return frozen_anchor && leq(cell, *frozen_anchor);
  }
  std::uint64_t innovation_stream(const IndexVec& cell) const {
    return is_frozen(cell) ? frozen_stream : rep_stream;
  }
  std::uint64_t level_stream(const IndexVec& cell) const {
    return is_frozen(cell) ? frozen_level_stream : rep_level_stream;
  }
};

/// Deterministic function of (base_seed, replicate_id, cell, frozen record).
InnovationLattice sample_innovations(const Rect& window, const InnovationSpec& spec,
                                     std::uint64_t base_seed, std::uint64_t replicate_id,
                                     const std::optional<FrozenPast>& frozen = std::nullopt);

}  // namespace qfield
