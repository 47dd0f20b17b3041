// Experiment runner: presets, declarative JSON configs, metrics emission,
// summary reports. One experiment per invocation; --sweep launches the named
// preset group in parallel child processes with disjoint output directories.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "simsiam/runner.hpp"

namespace {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void print_run_line(const std::string& name, const std::string& dir, int code) {
  const char* status = code == 0    ? "healthy"
                       : code == 20 ? "collapsed"
                       : code == 21 ? "diverged"
                       : code == 22 ? "unstable"
                                    : "error";
  std::printf("%-20s %-10s exit=%-3d %s\n", name.c_str(), status, code, dir.c_str());
}

int run_one(simsiam::ExperimentConfig cfg, const std::string& name, const std::string& out_dir) {
  const int code = simsiam::run_to_directory(cfg, out_dir);
  print_run_line(name, out_dir, code);
  return code;
}

int run_sweep(const std::string& sweep, std::string out_root, std::optional<std::uint64_t> seed) {
  auto runs = simsiam::sweep_configs(sweep);
  if (out_root.empty()) out_root = "runs/" + sweep;
  std::vector<std::pair<std::string, pid_t>> children;
  for (auto& [name, cfg] : runs) {
    if (seed) cfg.seed = *seed;
    const std::string dir = out_root + "/" + name;
    const pid_t pid = fork();
    if (pid < 0) throw std::runtime_error("fork failed");
    if (pid == 0) {
      int code = 2;
      try {
        code = simsiam::run_to_directory(cfg, dir);
      } catch (const std::exception& e) {
        std::fprintf(stderr, "%s: %s\n", name.c_str(), e.what());
        code = 2;
      }
      _exit(code);
    }
    children.emplace_back(name, pid);
  }
  bool any_error = false;
  for (auto& [name, pid] : children) {
    int status = 0;
    waitpid(pid, &status, 0);
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : 2;
    print_run_line(name, out_root + "/" + name, code);
    any_error = any_error || code == 1 || code == 2;
  }
  return any_error ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "simsiam_lab: stop-gradient Siamese representation-learning experiments at desk scale"};
  app.footer(
      "Exit codes: 0 healthy, 20 collapsed, 21 diverged, 22 unstable, 1 usage error, 2 runtime "
      "error.\nDataset root for cifar10 runs: $" +
      std::string(simsiam::kDataRootEnv) + " or dataset.cifar10.root in the config.");

  std::string config_path, preset, out_dir, sweep, reverdict_dir;
  std::optional<std::uint64_t> seed;
  bool list = false;
  app.add_option("--config", config_path, "JSON config file (see docs/formats.md for the schema)");
  app.add_option("--preset", preset, "named preset (base config; --config overrides on top)");
  app.add_option("--seed", seed, "override the experiment seed");
  app.add_option("--out", out_dir, "output directory (default runs/<name>)");
  app.add_option("--sweep", sweep, "run a named preset group in parallel processes");
  app.add_flag("--list-presets", list, "list presets and sweeps, then exit");
  app.add_option("--reverdict", reverdict_dir,
                 "recompute the verdict of a finished run directory from its metrics.jsonl");
  CLI11_PARSE(app, argc, argv);

  try {
    if (list) {
      std::printf("presets:\n");
      for (const auto& p : simsiam::list_presets())
        std::printf("  %-18s %s\n", p.name.c_str(), p.description.c_str());
      std::printf(
          "sweeps: fig2, table2, table3, table4, similarity, symmetry, hyp-multistep, "
          "hyp-ma-contrast, dimsweep\n");
      return 0;
    }
    if (!reverdict_dir.empty()) {
      const simsiam::CollapseVerdict v = simsiam::recompute_verdict(reverdict_dir);
      std::printf("%s trailing_loss=%.6f trailing_std=%.6f trend=%.6f\n",
                  simsiam::to_string(v.status), v.trailing_loss, v.trailing_std, v.loss_trend);
      return simsiam::exit_code_for(v.status);
    }
    if (!sweep.empty()) return run_sweep(sweep, out_dir, seed);

    if (preset.empty() && config_path.empty()) {
      std::fprintf(stderr, "nothing to do: pass --preset and/or --config (see --help)\n");
      return 1;
    }
    simsiam::ExperimentConfig cfg =
        preset.empty() ? simsiam::ExperimentConfig{} : simsiam::preset_config(preset);
    if (!config_path.empty())
      cfg = simsiam::config_from_json(simsiam::json::parse(read_text_file(config_path)),
                                      std::move(cfg));
    else
      cfg.validate();
    if (seed) cfg.seed = *seed;
    std::string name =
        preset.empty() ? std::filesystem::path(config_path).stem().string() : preset;
    if (out_dir.empty()) out_dir = "runs/" + name + "-seed" + std::to_string(cfg.seed);
    return run_one(std::move(cfg), name, out_dir);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
