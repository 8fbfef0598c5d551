#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "qfield/config.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::string> out;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> format;
};

void add_common(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--config", ov.config_path, "experiment config file (JSON)")->required();
  cmd->add_option("--out", ov.out, "output directory (overrides config)");
  cmd->add_option("--threads", ov.threads, "worker threads (overrides config)");
  cmd->add_option("--seed", ov.seed, "base seed (overrides config)");
  cmd->add_option("--format", ov.format, "csv or json (overrides config)");
}

int dispatch(const Overrides& ov, const std::string& forced_kind, bool dump_samples) {
  try {
    qfield::RunConfig config = qfield::load_config(ov.config_path);
    if (!forced_kind.empty() && config.kind != forced_kind) {
      if (forced_kind == "clt" || forced_kind == "simulate") {
        if (config.kind != "clt-annealed" && config.kind != "clt-quenched") {
          std::cerr << "error: config kind \"" << config.kind
                    << "\" is not a clt experiment\n";
          return 1;
        }
      } else {
        std::cerr << "error: config kind \"" << config.kind << "\" does not match subcommand (\""
                  << forced_kind << "\")\n";
        return 1;
      }
    }
    if (ov.out) config.out_dir = *ov.out;
    if (ov.threads) config.threads = *ov.threads;
    if (ov.seed) config.seed = *ov.seed;
    if (ov.format) config.format = *ov.format;
    if (dump_samples) config.dump_samples = true;
    return qfield::run(config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stationary random-field limit-theorem laboratory"};
  app.require_subcommand(1);

  struct Sub {
    const char* name;
    const char* help;
    std::string kind;  // forced config kind; "clt"/"simulate" accept both clt kinds
    bool dump;
  };
  const std::vector<Sub> subs = {
      {"simulate", "run a clt experiment and dump raw samples", "simulate", true},
      {"verify", "exact structure verification (ortho / commuting)", "verify-structure", false},
      {"clt", "quenched or annealed central limit experiment", "clt", false},
      {"functional", "finite-dimensional functional CLT vs the Brownian sheet", "functional",
       false},
      {"gh", "Gordin-Hannan style array-condition estimates", "gh-check", false},
      {"coboundary", "martingale-coboundary residual maxima", "coboundary", false},
      {"explore", "counterexample exceedance probe", "counterexample", false},
      {"conditions", "coefficient conditions and moment series", "check-conditions", false},
  };

  std::vector<Overrides> ovs(subs.size());
  std::vector<CLI::App*> cmds;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    CLI::App* cmd = app.add_subcommand(subs[i].name, subs[i].help);
    add_common(cmd, ovs[i]);
    cmds.push_back(cmd);
  }

  CLI11_PARSE(app, argc, argv);

  for (std::size_t i = 0; i < subs.size(); ++i)
    if (cmds[i]->parsed()) return dispatch(ovs[i], subs[i].kind, subs[i].dump);
  return 1;
}
