#ifndef SIMSIAM_PRESETS_HPP
#define SIMSIAM_PRESETS_HPP

// Named experiment presets: the ablation matrix at desk scale. Every preset
// is an ordinary ExperimentConfig; a config file may start from one via the
// "preset" key and override fields.

#include "simsiam/config.hpp"

namespace simsiam {

struct PresetInfo {
  std::string name;
  std::string description;
};

namespace detail {

// Shared toy setup: 10 Gaussian classes in 32-d, 1280 train / 320 val
// samples, MLP encoder with a 64-d output and a 16-d predictor bottleneck.
inline ExperimentConfig toy_base() {
  ExperimentConfig c;
  c.precision = Precision::f64;
  c.seed = 1;
  c.dataset.kind = DatasetKind::synthetic;
  c.dataset.synthetic = SyntheticConfig{10, 32, 128, 32, 10.0};
  c.encoder.backbone = BackboneKind::mlp;
  c.encoder.backbone_widths = {128, 128};
  c.encoder.projection_hidden = {128, 128};
  c.encoder.output_dim = 64;
  c.optimizer.base_lr = 0.1;
  c.optimizer.batch_size = 128;
  c.optimizer.momentum = 0.9;
  c.optimizer.weight_decay = 1e-4;
  c.optimizer.epochs = 150;  // 10 steps/epoch
  c.augment.noise_std = 0.5;
  c.augment.dropout_prob = 0.2;
  c.diagnostics.eval_interval = 100;
  c.diagnostics.log_interval = 1;
  return c;
}

inline ExperimentConfig hyp_base() {
  ExperimentConfig c = toy_base();
  c.trainer_mode = TrainerMode::alternating;
  c.predictor.mode = PredictorMode::identity;  // no prediction head in this formulation
  c.loss.symmetry = Symmetry::asymmetric;
  return c;
}

}  // namespace detail

inline std::vector<PresetInfo> list_presets() {
  return {
      {"baseline", "toy synthetic run with the default head placement and schedule"},
      {"fig2-stopgrad-on", "paired stop-gradient study, stop-gradient enabled"},
      {"fig2-stopgrad-off", "paired stop-gradient study, stop-gradient removed (collapses)"},
      {"table2a", "prediction head removed (identity predictor)"},
      {"table2b", "prediction head frozen at its random initialization"},
      {"table2c", "prediction head trained at a constant (undecayed) lr"},
      {"table3-b64", "batch-size study: batch 64 with linear lr scaling"},
      {"table3-b128", "batch-size study: batch 128"},
      {"table3-b256", "batch-size study: batch 256"},
      {"table3-b512", "batch-size study: batch 512"},
      {"table4a", "head BN study: no BN in either MLP head"},
      {"table4b", "head BN study: BN on hidden fc layers only"},
      {"table4c", "head BN study: default placement (hidden + projection output)"},
      {"table4d", "head BN study: BN everywhere incl. predictor output (unstable)"},
      {"xent", "cross-entropy similarity in place of cosine"},
      {"asym", "asymmetric (one-sided) loss"},
      {"asym2x", "asymmetric loss with two augmentation pairs per image"},
      {"appb-d16", "output dimension study: d=16, predictor bottleneck d/4"},
      {"appb-d32", "output dimension study: d=32"},
      {"appb-d64", "output dimension study: d=64"},
      {"appb-d128", "output dimension study: d=128"},
      {"hyp-1step", "alternating optimization, k=1 (the training scheme itself, no predictor)"},
      {"hyp-10step", "alternating optimization, eta cached for k=10 SGD steps"},
      {"hyp-100step", "alternating optimization, eta cached for k=100 SGD steps"},
      {"hyp-ma", "alternating optimization with a moving-average eta (m=0.8), no predictor"},
      {"cifar10", "CIFAR-10 subset smoke: small conv encoder, lr 0.03, wd 5e-4, batch 512"},
  };
}

inline ExperimentConfig preset_config(const std::string& name) {
  using detail::hyp_base;
  using detail::toy_base;
  if (name == "baseline") return toy_base();
  if (name == "fig2-stopgrad-on") {
    ExperimentConfig c = toy_base();
    c.optimizer.epochs = 250;
    c.loss.stop_grad = true;
    return c;
  }
  if (name == "fig2-stopgrad-off") {
    ExperimentConfig c = preset_config("fig2-stopgrad-on");
    c.loss.stop_grad = false;  // the only difference within the pair
    return c;
  }
  if (name == "table2a") {
    ExperimentConfig c = toy_base();
    c.predictor.mode = PredictorMode::identity;
    return c;
  }
  if (name == "table2b") {
    ExperimentConfig c = toy_base();
    c.predictor.mode = PredictorMode::frozen_random;
    return c;
  }
  if (name == "table2c") {
    ExperimentConfig c = toy_base();
    c.optimizer.predictor_lr_policy = PredictorLrPolicy::constant;
    return c;
  }
  if (name.rfind("table3-b", 0) == 0) {
    const long batch = std::stol(name.substr(8));
    if (batch != 64 && batch != 128 && batch != 256 && batch != 512)
      throw std::invalid_argument("unknown preset '" + name + "'");
    ExperimentConfig c = toy_base();
    c.optimizer.batch_size = batch;
    // Keep the step budget fixed at 1500 across the sweep.
    const long steps_per_epoch = 1280 / batch;
    c.optimizer.epochs = 1500 / steps_per_epoch;
    return c;
  }
  if (name == "table4a") {
    ExperimentConfig c = toy_base();
    c.encoder.proj_bn_hidden = false;
    c.encoder.proj_bn_output = false;
    c.predictor.bn_hidden = false;
    return c;
  }
  if (name == "table4b") {
    ExperimentConfig c = toy_base();
    c.encoder.proj_bn_output = false;
    return c;
  }
  if (name == "table4c") return toy_base();
  if (name == "table4d") {
    ExperimentConfig c = toy_base();
    c.predictor.bn_output = true;
    return c;
  }
  if (name == "xent") {
    ExperimentConfig c = toy_base();
    c.loss.similarity = Similarity::cross_entropy;
    return c;
  }
  if (name == "asym") {
    ExperimentConfig c = toy_base();
    c.loss.symmetry = Symmetry::asymmetric;
    return c;
  }
  if (name == "asym2x") {
    ExperimentConfig c = toy_base();
    c.loss.symmetry = Symmetry::asymmetric_2x;
    return c;
  }
  if (name.rfind("appb-d", 0) == 0) {
    const Index d = std::stol(name.substr(6));
    if (d != 16 && d != 32 && d != 64 && d != 128)
      throw std::invalid_argument("unknown preset '" + name + "'");
    ExperimentConfig c = toy_base();
    c.encoder.output_dim = d;
    c.predictor.hidden = 0;  // bottleneck d/4
    return c;
  }
  if (name == "hyp-1step") return hyp_base();
  if (name == "hyp-10step") {
    ExperimentConfig c = hyp_base();
    c.alternation.inner_steps = 10;
    return c;
  }
  if (name == "hyp-100step") {
    ExperimentConfig c = hyp_base();
    c.alternation.inner_steps = 100;
    return c;
  }
  if (name == "hyp-ma") {
    ExperimentConfig c = hyp_base();
    c.alternation.eta_update = EtaUpdateMode::moving_average;
    c.alternation.eta_momentum = 0.8;
    return c;
  }
  if (name == "cifar10") {
    ExperimentConfig c;
    c.precision = Precision::f32;
    c.seed = 1;
    c.dataset.kind = DatasetKind::cifar10;
    c.dataset.cifar10 = CifarConfig{"", 5000, 1000};
    c.encoder.backbone = BackboneKind::small_conv;
    c.encoder.backbone_widths = {32, 64, 128};
    c.encoder.projection_hidden = {128};
    c.encoder.output_dim = 64;
    c.optimizer.base_lr = 0.03;
    c.optimizer.batch_size = 512;
    c.optimizer.weight_decay = 5e-4;
    c.optimizer.epochs = 30;
    c.diagnostics.eval_interval = 25;
    c.diagnostics.log_interval = 1;
    c.diagnostics.knn_train_cap = 2000;
    return c;
  }
  throw std::invalid_argument("unknown preset '" + name + "' (see --list-presets)");
}

inline std::vector<std::pair<std::string, ExperimentConfig>> sweep_configs(
    const std::string& name) {
  auto expand = [](std::initializer_list<const char*> names) {
    std::vector<std::pair<std::string, ExperimentConfig>> out;
    for (const char* n : names) out.emplace_back(n, preset_config(n));
    return out;
  };
  if (name == "fig2") return expand({"fig2-stopgrad-on", "fig2-stopgrad-off"});
  if (name == "table2") return expand({"table2a", "table2b", "table2c"});
  if (name == "table3") return expand({"table3-b64", "table3-b128", "table3-b256", "table3-b512"});
  if (name == "table4") return expand({"table4a", "table4b", "table4c", "table4d"});
  if (name == "similarity") return expand({"baseline", "xent"});
  if (name == "symmetry") return expand({"baseline", "asym", "asym2x"});
  if (name == "hyp-multistep") return expand({"hyp-1step", "hyp-10step", "hyp-100step"});
  if (name == "hyp-ma-contrast") return expand({"hyp-ma", "hyp-1step"});
  if (name == "dimsweep") return expand({"appb-d16", "appb-d32", "appb-d64", "appb-d128"});
  throw std::invalid_argument("unknown sweep '" + name + "'");
}

}  // namespace simsiam

#endif  // SIMSIAM_PRESETS_HPP
