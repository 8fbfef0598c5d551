#include "qfield/innovations.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace qfield {

InnovationSpec InnovationSpec::gaussian(double var) {
  InnovationSpec s;
  s.kind = InnovationKind::kGaussian;
  s.var = var;
  s.validate();
  return s;
}

InnovationSpec InnovationSpec::finite_pmf(std::vector<double> values, std::vector<double> probs) {
  InnovationSpec s;
  s.kind = InnovationKind::kFinitePmf;
  s.values = std::move(values);
  s.probs = std::move(probs);
  s.validate();
  return s;
}

void InnovationSpec::validate() const {
  switch (kind) {
    case InnovationKind::kRademacher:
      return;
    case InnovationKind::kGaussian:
      if (!(var > 0.0)) throw std::invalid_argument("gaussian innovation: variance must be > 0");
      return;
    case InnovationKind::kFinitePmf: {
      if (values.empty() || values.size() != probs.size())
        throw std::invalid_argument("finite-pmf innovation: values/probs mismatch");
      double psum = 0.0, mean = 0.0;
      for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] < 0.0) throw std::invalid_argument("finite-pmf innovation: negative prob");
        psum += probs[i];
        mean += probs[i] * values[i];
      }
      if (std::abs(psum - 1.0) > 1e-12)
        throw std::invalid_argument("finite-pmf innovation: probs must sum to 1");
      if (std::abs(mean) > 1e-12)
        throw std::invalid_argument("finite-pmf innovation: must be centered");
      return;
    }
  }
}

double InnovationSpec::variance() const {
  switch (kind) {
    case InnovationKind::kRademacher:
      return 1.0;
    case InnovationKind::kGaussian:
      return var;
    case InnovationKind::kFinitePmf: {
      double v = 0.0;
      for (std::size_t i = 0; i < probs.size(); ++i) v += probs[i] * values[i] * values[i];
      return v;
    }
  }
  return 0.0;
}

double InnovationSpec::draw(std::uint64_t key) const {
  switch (kind) {
    case InnovationKind::kRademacher:
      return rademacher_from_key(key);
    case InnovationKind::kGaussian:
      return std::sqrt(var) * normal_from_key(key);
    case InnovationKind::kFinitePmf: {
      const double u = unit_from_key(key);
      double acc = 0.0;
      for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return values[i];
      }
      return values.back();
    }
  }
  return 0.0;
}

InnovationLattice sample_innovations(const Rect& window, const InnovationSpec& spec,
                                     std::uint64_t base_seed, std::uint64_t replicate_id,
                                     const std::optional<FrozenPast>& frozen) {
  if (window.volume() == 0) throw std::invalid_argument("sample_innovations: empty window");
  spec.validate();

  InnovationLattice lat;
  lat.window = window;
  lat.values = NdArray(window);
  lat.base_seed = base_seed;
  lat.replicate_id = replicate_id;
  lat.rep_stream = derive_seed(base_seed, StreamRole::kInnovation, replicate_id);
  lat.rep_level_stream = derive_seed(base_seed, StreamRole::kLevel, replicate_id);
  if (frozen) {
    if (frozen->anchor.size() != window.dim())
      throw std::out_of_range("sample_innovations: frozen anchor dimension mismatch");
    lat.frozen_anchor = frozen->anchor;
    lat.frozen_stream = derive_seed(frozen->past_seed, StreamRole::kInnovation, 0);
    lat.frozen_level_stream = derive_seed(frozen->past_seed, StreamRole::kLevel, 0);
  }

  auto& data = lat.values.data();
  std::size_t i = 0;
  for_each_point(window, [&](const IndexVec& cell) {
    data[i++] = spec.draw(cell_key(lat.innovation_stream(cell), cell));
  });
  return lat;
}

}  // namespace qfield
