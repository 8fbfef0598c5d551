#include "qfield/config.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "qfield/conditional.hpp"
#include "qfield/model_io.hpp"

namespace qfield {

namespace {

using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

std::size_t levenshtein(const std::string& a, const std::string& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t prev = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t cur = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1,
                         prev + (a[i - 1] == b[j - 1] ? 0 : 1)});
      prev = cur;
    }
  }
  return row[b.size()];
}

void reject_unknown(const json& j, const std::vector<std::string>& allowed,
                    const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find(allowed.begin(), allowed.end(), key) != allowed.end()) continue;
    std::string best;
    std::size_t best_d = 1000;
    for (const auto& cand : allowed) {
      const std::size_t d = levenshtein(key, cand);
      if (d < best_d) {
        best_d = d;
        best = cand;
      }
    }
    std::string msg = where + ": unknown key \"" + key + "\"";
    if (best_d <= 3) msg += " (did you mean \"" + best + "\"?)";
    throw std::invalid_argument(msg);
  }
}

std::vector<UnitRational> rationals_from_json(const json& j, const std::string& where) {
  std::vector<UnitRational> out;
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2)
      throw std::invalid_argument(where + ": entries must be [num, den] pairs");
    UnitRational r{e[0].get<long>(), e[1].get<long>()};
    r.validate();
    out.push_back(r);
  }
  return out;
}

const std::vector<std::string> kKinds = {"clt-annealed",   "clt-quenched", "functional",
                                         "gh-check",       "coboundary",   "counterexample",
                                         "verify-structure", "check-conditions"};

}  // namespace

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  reject_unknown(j,
                 {"kind", "model", "sizes", "replicates", "seed", "frozen_seeds", "out", "threads",
                  "format", "dump_samples", "acknowledge_non_omd", "params"},
                 "config");
  RunConfig c;
  c.kind = j.at("kind").get<std::string>();
  if (std::find(kKinds.begin(), kKinds.end(), c.kind) == kKinds.end())
    throw std::invalid_argument("config: unknown kind \"" + c.kind + "\"");
  c.model_file = j.at("model").get<std::string>();
  if (!std::filesystem::exists(c.model_file))
    throw std::invalid_argument("config: model file does not exist: " + c.model_file);
  if (j.contains("sizes")) {
    for (const auto& s : j.at("sizes")) {
      IndexVec size = s.get<IndexVec>();
      for (Index v : size)
        if (v < 1) throw std::invalid_argument("config: sizes must be positive");
      c.sizes.push_back(std::move(size));
    }
  }
  if (j.contains("replicates")) c.replicates = j.at("replicates").get<std::size_t>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("frozen_seeds"))
    c.frozen_seeds = j.at("frozen_seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("out")) c.out_dir = j.at("out").get<std::string>();
  if (j.contains("threads")) c.threads = j.at("threads").get<int>();
  if (j.contains("format")) {
    c.format = j.at("format").get<std::string>();
    if (c.format != "csv" && c.format != "json")
      throw std::invalid_argument("config: format must be csv or json");
  }
  if (j.contains("dump_samples")) c.dump_samples = j.at("dump_samples").get<bool>();
  if (j.contains("acknowledge_non_omd"))
    c.acknowledge_non_omd = j.at("acknowledge_non_omd").get<bool>();

  if (j.contains("params")) {
    const json& p = j.at("params");
    reject_unknown(p,
                   {"t_partition", "s_partition", "coeffs", "rel_tol", "qs", "window_ladder",
                    "budgets", "control_u_max", "cell_check_reps", "tolerance", "functional",
                    "eps", "phi_dim", "grid_n", "series_n_max"},
                   "params");
    if (p.contains("t_partition"))
      c.params.t_partition = rationals_from_json(p.at("t_partition"), "t_partition");
    if (p.contains("s_partition"))
      c.params.s_partition = rationals_from_json(p.at("s_partition"), "s_partition");
    if (p.contains("coeffs"))
      c.params.coeffs = p.at("coeffs").get<std::vector<std::vector<double>>>();
    if (p.contains("rel_tol")) c.params.rel_tol = p.at("rel_tol").get<double>();
    if (p.contains("qs")) c.params.qs = p.at("qs").get<std::vector<double>>();
    if (p.contains("window_ladder"))
      c.params.window_ladder = p.at("window_ladder").get<std::vector<long long>>();
    if (p.contains("budgets")) c.params.budgets = p.at("budgets").get<std::vector<double>>();
    if (p.contains("control_u_max")) c.params.control_u_max = p.at("control_u_max").get<double>();
    if (p.contains("cell_check_reps"))
      c.params.cell_check_reps = p.at("cell_check_reps").get<std::size_t>();
    if (p.contains("tolerance")) c.params.tolerance = p.at("tolerance").get<double>();
    if (p.contains("functional")) c.params.functional = p.at("functional").get<std::string>();
    if (p.contains("eps")) c.params.eps = p.at("eps").get<double>();
    if (p.contains("phi_dim")) c.params.phi_dim = p.at("phi_dim").get<int>();
    if (p.contains("grid_n")) c.params.grid_n = p.at("grid_n").get<Index>();
    if (p.contains("series_n_max")) c.params.series_n_max = p.at("series_n_max").get<long long>();
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config file not found: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string emit_config(const RunConfig& c) {
  json j;
  j["kind"] = c.kind;
  j["model"] = c.model_file;
  j["sizes"] = c.sizes;
  j["replicates"] = c.replicates;
  j["seed"] = c.seed;
  j["frozen_seeds"] = c.frozen_seeds;
  j["out"] = c.out_dir;
  j["threads"] = c.threads;
  j["format"] = c.format;
  j["dump_samples"] = c.dump_samples;
  j["acknowledge_non_omd"] = c.acknowledge_non_omd;
  json p;
  json tp = json::array(), sp = json::array();
  for (const auto& r : c.params.t_partition) tp.push_back({r.num, r.den});
  for (const auto& r : c.params.s_partition) sp.push_back({r.num, r.den});
  p["t_partition"] = tp;
  p["s_partition"] = sp;
  p["coeffs"] = c.params.coeffs;
  p["rel_tol"] = c.params.rel_tol;
  p["qs"] = c.params.qs;
  p["window_ladder"] = c.params.window_ladder;
  p["budgets"] = c.params.budgets;
  p["control_u_max"] = c.params.control_u_max;
  p["cell_check_reps"] = c.params.cell_check_reps;
  p["tolerance"] = c.params.tolerance;
  p["functional"] = c.params.functional;
  p["eps"] = c.params.eps;
  p["phi_dim"] = c.params.phi_dim;
  p["grid_n"] = c.params.grid_n;
  p["series_n_max"] = c.params.series_n_max;
  j["params"] = p;
  return j.dump(2);
}

std::string config_hash(const RunConfig& config) {
  // FNV-1a 64
  std::uint64_t h = 14695981039346656037ULL;
  for (char ch : emit_config(config)) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

std::string fmt12(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

MomentFunctional functional_from_params(const RunParams& p) {
  if (p.functional == "plain") return MomentFunctional::plain();
  if (p.functional == "x_log1p") return MomentFunctional::x_log1p();
  if (p.functional == "g_eps") return MomentFunctional::g_eps(p.eps);
  if (p.functional == "phi_d") return MomentFunctional::phi_d(p.phi_dim);
  throw std::invalid_argument("params: unknown functional \"" + p.functional + "\"");
}

ExperimentSpec make_spec(const RunConfig& c, const FieldModel& model) {
  ExperimentSpec spec;
  spec.model = model;
  spec.sizes = c.sizes;
  spec.replicates = c.replicates;
  spec.frozen_seeds = c.frozen_seeds;
  spec.base_seed = c.seed;
  spec.threads = c.threads;
  spec.acknowledge_non_omd = c.acknowledge_non_omd;
  return spec;
}

int run_clt_kind(const RunConfig& c, const FieldModel& model, bool quenched,
                 std::vector<std::string>& outputs) {
  const auto spec = make_spec(c, model);
  const CLTResult result = quenched ? run_quenched_clt(spec) : run_annealed_clt(spec);
  const std::filesystem::path out(c.out_dir);
  const std::string name = c.format == "csv" ? "results.csv" : "results.json";
  write_atomic(out / name, c.format == "csv" ? clt_csv(result) : clt_json(result));
  outputs.push_back(name);
  // the JSON summary always accompanies a CSV run
  if (c.format == "csv") {
    write_atomic(out / "summary.json", clt_json(result));
    outputs.push_back("summary.json");
  }
  if (c.dump_samples) {
    std::size_t idx = 0;
    for (const auto& cell : result.cells) {
      std::ostringstream fn;
      fn << "samples_" << (cell.frozen_seed ? std::to_string(*cell.frozen_seed) : "annealed")
         << "_" << idx++ << ".csv";
      std::ostringstream body;
      body << "sample\n";
      for (double x : cell.dist.sorted) body << fmt12(x) << '\n';
      write_atomic(out / fn.str(), body.str());
      outputs.push_back(fn.str());
    }
  }
  std::cout << "clt: " << result.cells.size() << " cells, sigma2=" << result.sigma2.value
            << (result.all_pass ? " [pass]" : " [FAIL]") << "\n";
  return result.all_pass ? 0 : 2;
}

int run_functional_kind(const RunConfig& c, const FieldModel& model,
                        std::vector<std::string>& outputs) {
  const auto spec = make_spec(c, model);
  FddSpec fdd;
  fdd.t_partition = c.params.t_partition;
  fdd.s_partition = c.params.s_partition;
  fdd.coeffs = c.params.coeffs;
  const auto rep = run_functional_fdd(spec, fdd, c.params.rel_tol);
  json j;
  j["sigma2"] = rep.sigma2;
  j["max_cov_rel_err"] = rep.max_cov_rel_err;
  j["fdd_variance"] = rep.fdd_variance;
  j["gamma"] = rep.gamma;
  j["fdd_rel_err"] = rep.fdd_rel_err;
  j["pass"] = rep.pass;
  json grid = json::array();
  for (std::size_t i = 0; i < rep.grid.size(); ++i)
    grid.push_back({{"t", rep.grid[i].first},
                    {"s", rep.grid[i].second},
                    {"var_emp", rep.emp_cov[i][i]},
                    {"var_sheet", rep.sheet_cov[i][i]}});
  j["grid"] = grid;
  write_atomic(std::filesystem::path(c.out_dir) / "functional.json", j.dump(2));
  outputs.push_back("functional.json");
  std::cout << "functional: cov err " << rep.max_cov_rel_err << ", fdd err " << rep.fdd_rel_err
            << (rep.pass ? " [pass]" : " [FAIL]") << "\n";
  return rep.pass ? 0 : 2;
}

int run_gh_kind(const RunConfig& c, const FieldModel& model, std::vector<std::string>& outputs) {
  const auto spec = make_spec(c, model);
  const auto rep = gh_check(spec, c.params.qs);
  json j;
  j["sigma2"] = rep.sigma2;
  j["limit_decreasing"] = rep.limit_decreasing;
  json entries = json::array();
  for (const auto& e : rep.entries)
    entries.push_back({{"size", e.size},
                       {"q", e.q},
                       {"limit_stat", e.limit_stat},
                       {"limit_se", e.limit_se},
                       {"max_stat", e.max_stat},
                       {"max_se", e.max_se}});
  j["entries"] = entries;
  write_atomic(std::filesystem::path(c.out_dir) / "gh.json", j.dump(2));
  outputs.push_back("gh.json");
  std::cout << "gh: limit trend " << (rep.limit_decreasing ? "decreasing [pass]" : "[FAIL]")
            << "\n";
  return rep.limit_decreasing ? 0 : 2;
}

int run_coboundary_kind(const RunConfig& c, const FieldModel& model,
                        std::vector<std::string>& outputs) {
  const auto spec = make_spec(c, model);
  const auto rep = coboundary_residuals(spec);
  json j;
  json entries = json::array();
  bool pass = true;
  for (const auto& e : rep.entries) {
    pass = pass && e.r3_within_bound;
    entries.push_back({{"size", e.size},
                       {"median", e.median},
                       {"p90", e.p90},
                       {"max", e.max},
                       {"r1_max", e.r1_max},
                       {"r2_max", e.r2_max},
                       {"r3_max", e.r3_max},
                       {"r3_bound", e.r3_bound},
                       {"r3_within_bound", e.r3_within_bound}});
  }
  j["entries"] = entries;
  j["decay_ratios"] = rep.decay_ratios;
  j["pass"] = pass;
  write_atomic(std::filesystem::path(c.out_dir) / "coboundary.json", j.dump(2));
  outputs.push_back("coboundary.json");
  std::cout << "coboundary: " << rep.entries.size() << " sizes"
            << (pass ? " [pass]" : " [FAIL]") << "\n";
  return pass ? 0 : 2;
}

int run_counterexample_kind(const RunConfig& c, const FieldModel& model,
                            std::vector<std::string>& outputs) {
  const auto* uf = std::get_if<UFieldSpec>(&model.variant);
  if (!uf) throw std::invalid_argument("counterexample run needs a u_field model");
  const auto rep = counterexample_probe(*uf, c.params.window_ladder, c.params.budgets,
                                        c.params.control_u_max, c.params.cell_check_reps, c.seed,
                                        c.threads);
  json j;
  json entries = json::array();
  for (const auto& e : rep.entries)
    entries.push_back({{"window_n", e.window_n},
                       {"budget", e.budget},
                       {"expected_count", e.expected_count},
                       {"prob_exceed", e.prob_exceed},
                       {"control_expected", e.control_expected}});
  j["entries"] = entries;
  json ratios = json::array();
  bool growing = false;
  for (const auto& [b, r] : rep.count_ratios) {
    ratios.push_back({{"budget", b}, {"ratio", r}});
    if (r > 1.0) growing = true;
  }
  j["count_ratios"] = ratios;
  json checks = json::array();
  for (const auto& cc : rep.cell_checks)
    checks.push_back({{"cell", cc.cell},
                      {"budget", cc.budget},
                      {"analytic", cc.analytic},
                      {"mc", cc.mc},
                      {"mc_se", cc.mc_se},
                      {"reps", cc.reps}});
  j["cell_checks"] = checks;
  // growing exceedance mass is the non-tightness evidence: verdict "fail"
  j["tight"] = !growing;
  write_atomic(std::filesystem::path(c.out_dir) / "counterexample.json", j.dump(2));
  outputs.push_back("counterexample.json");
  std::cout << "counterexample: exceedance mass " << (growing ? "grows [FAIL]" : "stable [pass]")
            << "\n";
  return growing ? 2 : 0;
}

int run_verify_kind(const RunConfig& c, const FieldModel& model,
                    std::vector<std::string>& outputs) {
  std::vector<IndexVec> offsets;
  const std::size_t d = model.dim;
  for_each_point(Rect(IndexVec(d, -1), IndexVec(d, 2)),
                 [&](const IndexVec& u) { offsets.push_back(u); });
  const auto ortho = verify_ortho(model, offsets, c.params.tolerance);
  const auto f = model_functional(model);
  IndexVec u(d, 0), a(d, 0);
  u[0] = -1;
  a[d - 1] = -1;  // incomparable for d >= 2, equal for d = 1
  const auto com = verify_commuting(f, u, a, c.params.tolerance);
  json j;
  j["ortho"] = json::parse(report_to_json(ortho));
  j["commuting"] = json::parse(report_to_json(com));
  const bool pass = ortho.pass && com.pass;
  j["pass"] = pass;
  write_atomic(std::filesystem::path(c.out_dir) / "verify.json", j.dump(2));
  outputs.push_back("verify.json");
  std::cout << "verify: ortho " << (ortho.pass ? "pass" : "FAIL") << ", commuting "
            << (com.pass ? "pass" : "FAIL") << "\n";
  return pass ? 0 : 2;
}

int run_conditions_kind(const RunConfig& c, const FieldModel& model,
                        std::vector<std::string>& outputs) {
  json j;
  const auto f = functional_from_params(c.params);
  if (const auto* uf = std::get_if<UFieldSpec>(&model.variant)) {
    const auto series =
        u_moment_series(std::max(uf->n_max, c.params.series_n_max), f);
    json s = json::array();
    for (const auto& [n, v] : series) s.push_back({{"n", n}, {"partial_sum", v}});
    j["series"] = s;
  } else {
    const auto rep = check_con1(model, c.params.grid_n, f, c.replicates, c.seed);
    json g = json::array();
    for (const auto& e : rep.grid)
      g.push_back({{"n", e.n}, {"value", e.value}, {"se", e.se}});
    j["grid"] = g;
    j["sup"] = rep.sup;
    j["arg_sup"] = rep.arg_sup;
    j["stabilized"] = rep.stabilized;
    if (const auto* lin = std::get_if<LinearSpec>(&model.variant)) {
      const auto chk = check_lin(lin->kernel, model.dim, c.params.grid_n);
      j["lin_sup"] = chk.sup;
      j["lin_stabilized_at"] = chk.stabilized_at;
      j["lin_stabilized_value"] = chk.stabilized_value;
    }
    if (const auto* vol = std::get_if<VolterraSpec>(&model.variant)) {
      const auto chk = check_volt(vol->coeffs, model.dim, c.params.grid_n);
      j["volt_sup"] = chk.sup;
      j["volt_stabilized_at"] = chk.stabilized_at;
      j["volt_stabilized_value"] = chk.stabilized_value;
    }
  }
  write_atomic(std::filesystem::path(c.out_dir) / "conditions.json", j.dump(2));
  outputs.push_back("conditions.json");
  std::cout << "conditions: written\n";
  return 0;
}

}  // namespace

int run(const RunConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::string> outputs;
  int code = 1;
  try {
    std::filesystem::create_directories(config.out_dir);
    const FieldModel model = load_model(config.model_file);
    if (config.kind == "clt-annealed")
      code = run_clt_kind(config, model, false, outputs);
    else if (config.kind == "clt-quenched")
      code = run_clt_kind(config, model, true, outputs);
    else if (config.kind == "functional")
      code = run_functional_kind(config, model, outputs);
    else if (config.kind == "gh-check")
      code = run_gh_kind(config, model, outputs);
    else if (config.kind == "coboundary")
      code = run_coboundary_kind(config, model, outputs);
    else if (config.kind == "counterexample")
      code = run_counterexample_kind(config, model, outputs);
    else if (config.kind == "verify-structure")
      code = run_verify_kind(config, model, outputs);
    else if (config.kind == "check-conditions")
      code = run_conditions_kind(config, model, outputs);
    else
      throw std::invalid_argument("unknown kind: " + config.kind);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    json m;
    m["config_hash"] = config_hash(config);
    m["library_version"] = kVersion;
    std::ostringstream platform;
    platform << "cxx-" << __cplusplus;
    m["platform"] = platform.str();
    m["outputs"] = outputs;
    m["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_atomic(std::filesystem::path(config.out_dir) / "manifest.json", m.dump(2));
  } catch (const std::exception& e) {
    std::cerr << "error writing manifest: " << e.what() << "\n";
    return 1;
  }
  return code;
}

}  // namespace qfield
