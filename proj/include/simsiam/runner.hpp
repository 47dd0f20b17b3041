#ifndef SIMSIAM_RUNNER_HPP
#define SIMSIAM_RUNNER_HPP

#include <filesystem>
#include <fstream>

#include "simsiam/trainer.hpp"

namespace simsiam {

// Exit codes are stable scripting API: 0 healthy, 20 collapsed, 21 diverged,
// 22 unstable; 1 usage/config error, 2 runtime error.
inline int exit_code_for(CollapseStatus s) {
  switch (s) {
    case CollapseStatus::healthy: return 0;
    case CollapseStatus::collapsed: return 20;
    case CollapseStatus::diverged: return 21;
    case CollapseStatus::unstable: return 22;
  }
  return 2;
}

inline json metrics_line(const MetricsRecord& r) {
  json j;
  j["step"] = r.step;
  j["epoch"] = r.epoch;
  j["lr"] = r.lr;
  j["loss"] = std::isfinite(r.loss) ? json(r.loss) : json(nullptr);
  j["output_std"] = r.output_std;
  j["knn_acc"] = r.knn_acc ? json(*r.knn_acc) : json(nullptr);
  j["wallclock_ms"] = r.wallclock_ms;
  return j;
}

inline MetricsRecord metrics_from_line(const json& j) {
  MetricsRecord r;
  r.step = j.at("step").get<long>();
  r.epoch = j.at("epoch").get<long>();
  r.lr = j.at("lr").get<double>();
  r.loss = j.at("loss").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                  : j.at("loss").get<double>();
  r.output_std = j.at("output_std").get<double>();
  if (!j.at("knn_acc").is_null()) r.knn_acc = j.at("knn_acc").get<double>();
  r.wallclock_ms = j.at("wallclock_ms").get<double>();
  return r;
}

inline json thresholds_to_json(const CollapseThresholds& t) {
  return json{{"window", t.window},
              {"loss_floor", t.loss_floor},
              {"std_threshold", t.std_threshold},
              {"osc_threshold", t.osc_threshold},
              {"rise_margin", t.rise_margin}};
}

inline CollapseThresholds thresholds_from_json(const json& j) {
  CollapseThresholds t;
  t.window = j.at("window").get<long>();
  t.loss_floor = j.at("loss_floor").get<double>();
  t.std_threshold = j.at("std_threshold").get<double>();
  t.osc_threshold = j.at("osc_threshold").get<double>();
  t.rise_margin = j.at("rise_margin").get<double>();
  return t;
}

inline json verdict_to_json(const CollapseVerdict& v) {
  return json{{"status", to_string(v.status)},
              {"trailing_loss", v.trailing_loss},
              {"trailing_std", v.trailing_std},
              {"loss_trend", v.loss_trend},
              {"nonfinite", v.nonfinite}};
}

// Runs one experiment into a directory: config.json (resolved), metrics.jsonl
// (one JSON object per logged step), summary.json, checkpoint.json, and for
// alternating runs eta_bank-free (the bank is reconstructible; see docs).
// Returns the verdict exit code.
inline int run_to_directory(const ExperimentConfig& cfg, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  {
    std::ofstream c(fs::path(out_dir) / "config.json");
    if (!c) throw std::runtime_error("cannot write " + out_dir + "/config.json");
    c << to_json(cfg).dump(2) << "\n";
  }
  std::ofstream metrics(fs::path(out_dir) / "metrics.jsonl");
  if (!metrics) throw std::runtime_error("cannot write " + out_dir + "/metrics.jsonl");
  ExperimentResult res = run_experiment(cfg, [&](const MetricsRecord& r) {
    metrics << metrics_line(r).dump() << "\n";
  });
  metrics.flush();

  json summary;
  summary["verdict"] = verdict_to_json(res.verdict);
  summary["thresholds"] = thresholds_to_json(res.thresholds);
  json final;
  final["loss"] = res.records.empty() || !std::isfinite(res.records.back().loss)
                      ? json(nullptr)
                      : json(res.records.back().loss);
  final["output_std"] = res.records.empty() ? json(nullptr) : json(res.records.back().output_std);
  final["knn_acc"] = res.final_knn ? json(*res.final_knn) : json(nullptr);
  final["linear_probe_acc"] = res.final_probe ? json(*res.final_probe) : json(nullptr);
  summary["final"] = final;
  summary["logged_steps"] = res.records.size();
  summary["total_steps"] = res.total_steps;
  summary["aborted"] = res.aborted;
  summary["num_classes"] = res.num_classes;
  const int code = exit_code_for(res.verdict.status);
  summary["exit_code"] = code;
  {
    std::ofstream s(fs::path(out_dir) / "summary.json");
    s << summary.dump(2) << "\n";
  }
  {
    std::ofstream ck(fs::path(out_dir) / "checkpoint.json");
    ck << res.final_checkpoint.dump() << "\n";
  }
  return code;
}

// Recomputes the verdict offline from metrics.jsonl plus the thresholds
// recorded in summary.json; the stored verdict must be a pure function of
// these two inputs.
inline CollapseVerdict recompute_verdict(const std::string& run_dir) {
  namespace fs = std::filesystem;
  std::ifstream s(fs::path(run_dir) / "summary.json");
  if (!s) throw std::runtime_error("missing " + run_dir + "/summary.json");
  json summary;
  s >> summary;
  CollapseThresholds th = thresholds_from_json(summary.at("thresholds"));

  std::ifstream m(fs::path(run_dir) / "metrics.jsonl");
  if (!m) throw std::runtime_error("missing " + run_dir + "/metrics.jsonl");
  std::vector<MetricsRecord> records;
  std::string line;
  while (std::getline(m, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    records.push_back(metrics_from_line(json::parse(line)));
  }
  th.window = std::max<long>(1, std::min<long>(th.window, static_cast<long>(records.size())));
  return records.empty() ? CollapseVerdict{} : collapse_verdict(records, th);
}

}  // namespace simsiam

#endif  // SIMSIAM_RUNNER_HPP
