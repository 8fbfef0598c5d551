#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qfield/config.hpp"
#include "qfield/harness.hpp"
#include "qfield/model_io.hpp"

namespace py = pybind11;
using namespace qfield;

PYBIND11_MODULE(_qfield, m) {
  m.doc() = "Stationary random-field simulation laboratory (C++ core)";

  m.def("model_roundtrip", [](const std::string& text) {
    return model_to_json(model_from_json(text));
  },
      "Parse a model JSON document strictly and re-emit it canonically.");

  m.def("sigma2", [](const std::string& model_json) {
    const auto est = estimate_sigma2(model_from_json(model_json));
    return py::make_tuple(est.value, est.method, est.error);
  },
      "Per-cell variance estimate: (value, method, standard_error).");

  m.def("replicate_sum",
        [](const std::string& model_json, const std::vector<Index>& size,
           std::uint64_t base_seed, std::uint64_t replicate,
           std::optional<std::uint64_t> frozen_seed) {
          return replicate_sum(model_from_json(model_json), size, base_seed, replicate,
                               frozen_seed);
        },
        py::arg("model_json"), py::arg("size"), py::arg("base_seed") = 1,
        py::arg("replicate") = 0, py::arg("frozen_seed") = std::nullopt,
        "One normalized partial-sum sample S(box)/sqrt(volume).");

  m.def("u_moment_series",
        [](long long n_max, const std::string& functional, double eps, int phi_dim,
           std::vector<long long> checkpoints) {
          MomentFunctional f = MomentFunctional::plain();
          if (functional == "g_eps") f = MomentFunctional::g_eps(eps);
          else if (functional == "x_log1p") f = MomentFunctional::x_log1p();
          else if (functional == "phi_d") f = MomentFunctional::phi_d(phi_dim);
          else if (functional != "plain")
            throw std::invalid_argument("unknown functional: " + functional);
          return u_moment_series(n_max, f, std::move(checkpoints));
        },
        py::arg("n_max"), py::arg("functional") = "plain", py::arg("eps") = 0.5,
        py::arg("phi_dim") = 2, py::arg("checkpoints") = std::vector<long long>{},
        "Partial sums of the heavy-level moment series at the given checkpoints.");

  m.def("run_config", [](const std::string& config_json) {
    return run(parse_config(config_json));
  },
      "Execute a full experiment config; returns the process-style exit code.");

  m.def("config_hash", [](const std::string& config_json) {
    return config_hash(parse_config(config_json));
  });
}
