#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "simsiam/runner.hpp"

using namespace simsiam;

namespace {

ExperimentConfig tiny_cfg() {
  ExperimentConfig c;
  c.dataset.synthetic = SyntheticConfig{2, 8, 16, 8, 6.0};
  c.encoder.backbone_widths = {10};
  c.encoder.projection_hidden = {10};
  c.encoder.output_dim = 12;
  c.optimizer.batch_size = 8;
  c.optimizer.epochs = 3;
  c.diagnostics.eval_interval = 6;
  c.diagnostics.probe.epochs = 5;
  return c;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag)
      : path(std::filesystem::temp_directory_path() / ("simsiam_cli_" + tag)) {
    std::filesystem::remove_all(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("parse_config: empty document yields the baseline defaults") {
  ExperimentConfig c = parse_config("");
  CHECK(c.optimizer.base_lr == 0.05);
  CHECK(c.optimizer.weight_decay == 1e-4);
  CHECK(c.optimizer.momentum == 0.9);
  CHECK(c.optimizer.batch_size == 512);
  CHECK(c.encoder.output_dim == 64);  // d scaled to desk size
  CHECK(c.loss.similarity == Similarity::cosine);
  CHECK(c.loss.symmetry == Symmetry::symmetric);
  CHECK(c.loss.stop_grad);
  CHECK(c.predictor.mode == PredictorMode::learned);
  CHECK(c.encoder.proj_bn_hidden);
  CHECK(c.encoder.proj_bn_output);
  CHECK(parse_config("{}") == c);
  CHECK(parse_config("  \n\t ") == c);
}

TEST_CASE("parse_config: preset key seeds the document") {
  ExperimentConfig c = parse_config(R"({"preset": "table4a"})");
  CHECK_FALSE(c.encoder.proj_bn_hidden);
  CHECK_FALSE(c.encoder.proj_bn_output);
  CHECK_FALSE(c.predictor.bn_hidden);
  CHECK(c == preset_config("table4a"));

  // Overrides apply on top of the preset.
  ExperimentConfig c2 = parse_config(R"({"preset": "table4a", "seed": 9,
                                         "optimizer": {"batch_size": 64}})");
  CHECK(c2.seed == 9);
  CHECK(c2.optimizer.batch_size == 64);
  CHECK_FALSE(c2.encoder.proj_bn_hidden);

  CHECK_THROWS_WITH_AS(parse_config(R"({"preset": "nope"})"), doctest::Contains("unknown preset"),
                       std::invalid_argument);
}

TEST_CASE("parse_config: misspelled keys are hard errors naming the key") {
  CHECK_THROWS_WITH_AS(parse_config(R"({"optimizer": {"momentm": 0.9}})"),
                       doctest::Contains("optimizer.momentm"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config(R"({"sedd": 3})"), doctest::Contains("sedd"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config(R"({"trainer": {"alternation": {"inner": 2}}})"),
                       doctest::Contains("trainer.alternation.inner"), std::invalid_argument);
}

TEST_CASE("parse_config: invariant violations carry field-level messages") {
  CHECK_THROWS_WITH_AS(parse_config(R"({"optimizer": {"epochs": 0}})"),
                       doctest::Contains("optimizer.epochs"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config(R"({"augment": {"crop_scale": [0.0, 1.0]}})"),
                       doctest::Contains("crop_scale"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config(R"({"loss": {"similarity": "cosinus"}})"),
                       doctest::Contains("loss.similarity"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config(R"({"trainer": {"mode": "alternating"}})"),
                       doctest::Contains("predictor.mode=identity"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("not json at all"), doctest::Contains("not valid JSON"),
                       std::invalid_argument);
}

TEST_CASE("config serialization round-trips through JSON") {
  for (const auto& p : list_presets()) {
    ExperimentConfig c = preset_config(p.name);
    ExperimentConfig back = config_from_json(to_json(c));
    CHECK(back == c);
  }
  ExperimentConfig t = tiny_cfg();
  CHECK(config_from_json(to_json(t)) == t);
}

TEST_CASE("every listed preset produces a valid config and encoder spec") {
  for (const auto& p : list_presets()) {
    CAPTURE(p.name);
    ExperimentConfig c = preset_config(p.name);
    CHECK_NOTHROW(c.validate());
    EncoderSpec spec = c.encoder_spec();
    CHECK_NOTHROW(Encoder<double>{spec});
    CHECK(!p.description.empty());
  }
  CHECK_THROWS_AS(preset_config("definitely-not-a-preset"), std::invalid_argument);
}

TEST_CASE("sweeps expand to their preset groups") {
  CHECK(sweep_configs("fig2").size() == 2);
  CHECK(sweep_configs("table2").size() == 3);
  CHECK(sweep_configs("table4").size() == 4);
  CHECK(sweep_configs("hyp-multistep").size() == 3);
  auto fig2 = sweep_configs("fig2");
  CHECK(fig2[0].second.loss.stop_grad);
  CHECK_FALSE(fig2[1].second.loss.stop_grad);
  // Paired runs must differ only in the stop-gradient flag.
  ExperimentConfig on = fig2[0].second;
  on.loss.stop_grad = false;
  CHECK(on == fig2[1].second);
  CHECK_THROWS_AS(sweep_configs("fig3"), std::invalid_argument);
}

TEST_CASE("run_to_directory: artifacts, exit code, offline verdict recompute") {
  TempDir dir("run");
  const int code = run_to_directory(tiny_cfg(), dir.path.string());
  CHECK((code == 0 || code == 20 || code == 21 || code == 22));
  CHECK(std::filesystem::exists(dir.path / "config.json"));
  CHECK(std::filesystem::exists(dir.path / "metrics.jsonl"));
  CHECK(std::filesystem::exists(dir.path / "summary.json"));
  CHECK(std::filesystem::exists(dir.path / "checkpoint.json"));

  // Config echo reproduces the run config.
  {
    std::ifstream c(dir.path / "config.json");
    json j;
    c >> j;
    CHECK(config_from_json(j) == tiny_cfg());
  }
  // Metrics lines parse and are dense (log_interval 1).
  long lines = 0;
  {
    std::ifstream m(dir.path / "metrics.jsonl");
    std::string line;
    while (std::getline(m, line))
      if (!line.empty()) {
        MetricsRecord r = metrics_from_line(json::parse(line));
        CHECK(r.step == lines);
        ++lines;
      }
  }
  CHECK(lines == 6);  // 3 epochs x 2 steps

  // summary.json's verdict is recomputable from metrics.jsonl alone.
  json summary;
  {
    std::ifstream s(dir.path / "summary.json");
    s >> summary;
  }
  CollapseVerdict re = recompute_verdict(dir.path.string());
  CHECK(summary.at("verdict").at("status").get<std::string>() == to_string(re.status));
  CHECK(summary.at("verdict").at("trailing_loss").get<double>() ==
        doctest::Approx(re.trailing_loss).epsilon(1e-12));
  CHECK(summary.at("exit_code").get<int>() == code);

  // The checkpoint restores a usable model.
  {
    std::ifstream ck(dir.path / "checkpoint.json");
    json j;
    ck >> j;
    auto model = checkpoint_from_json<double>(j);
    CHECK(model->encoder.output_dim() == 12);
  }
}

TEST_CASE("metrics_line: NaN loss round-trips as null") {
  MetricsRecord r;
  r.step = 3;
  r.loss = std::numeric_limits<double>::quiet_NaN();
  r.output_std = 0.5;
  json j = metrics_line(r);
  CHECK(j.at("loss").is_null());
  MetricsRecord back = metrics_from_line(j);
  CHECK(std::isnan(back.loss));
  CHECK(back.step == 3);
  CHECK_FALSE(back.knn_acc.has_value());
}

TEST_CASE("exit codes are stable") {
  CHECK(exit_code_for(CollapseStatus::healthy) == 0);
  CHECK(exit_code_for(CollapseStatus::collapsed) == 20);
  CHECK(exit_code_for(CollapseStatus::diverged) == 21);
  CHECK(exit_code_for(CollapseStatus::unstable) == 22);
}
