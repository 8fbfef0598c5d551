#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qfield/harness.hpp"

namespace qfield {

/// Experiment-kind specific knobs; each kind validates its own subset.
struct RunParams {
  // functional
  std::vector<UnitRational> t_partition;
  std::vector<UnitRational> s_partition;
  std::vector<std::vector<double>> coeffs;
  double rel_tol = 0.05;
  // gh-check
  std::vector<double> qs = {0.25, 0.5, 1.0};
  // counterexample
  std::vector<long long> window_ladder = {1000, 10000};
  std::vector<double> budgets = {1.0, 4.0, 16.0};
  double control_u_max = 4.0;
  std::size_t cell_check_reps = 20000;
  // verify-structure
  double tolerance = 1e-12;
  // check-conditions
  std::string functional = "plain";  // plain | x_log1p | g_eps | phi_d
  double eps = 0.5;
  int phi_dim = 2;
  Index grid_n = 6;
  long long series_n_max = 1000000;
};

struct RunConfig {
  std::string kind;  // clt-annealed | clt-quenched | functional | gh-check |
                     // coboundary | counterexample | verify-structure | check-conditions
  std::string model_file;
  std::vector<IndexVec> sizes;
  std::size_t replicates = 10000;
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> frozen_seeds;
  std::string out_dir = ".";
  int threads = 0;  // 0 = available
  std::string format = "csv";
  bool dump_samples = false;
  bool acknowledge_non_omd = false;
  RunParams params;
};

/// Strict parse: unknown keys are fatal, with a nearest-key suggestion.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
/// Canonical serialization; parse(emit(parse(x))) == parse(x).
std::string emit_config(const RunConfig& config);

struct RunManifest {
  std::string config_hash;
  std::string library_version;
  std::string platform;
  std::vector<std::string> outputs;
  double wall_clock_seconds = 0.0;
};

/// 0 = all verdicts pass, 2 = statistical verdict failure, 1 = execution error.
int run(const RunConfig& config);

std::string config_hash(const RunConfig& config);

}  // namespace qfield
