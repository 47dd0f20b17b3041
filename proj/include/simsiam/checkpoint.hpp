#ifndef SIMSIAM_CHECKPOINT_HPP
#define SIMSIAM_CHECKPOINT_HPP

#include <fstream>
#include <memory>
#include <string>

#include <json.hpp>

#include "simsiam/model.hpp"

namespace simsiam {

using json = nlohmann::json;

// ---- spec <-> json -------------------------------------------------------

inline json to_json(const MlpSpec& s) {
  return json{{"layer_dims", s.layer_dims},
              {"bn_hidden", s.bn_hidden},
              {"bn_output", s.bn_output},
              {"bn_output_affine", s.bn_output_affine},
              {"relu_output", s.relu_output}};
}

inline MlpSpec mlp_spec_from_json(const json& j) {
  MlpSpec s;
  s.layer_dims = j.at("layer_dims").get<std::vector<Index>>();
  s.bn_hidden = j.at("bn_hidden").get<bool>();
  s.bn_output = j.at("bn_output").get<bool>();
  s.bn_output_affine = j.at("bn_output_affine").get<bool>();
  s.relu_output = j.value("relu_output", false);
  return s;
}

inline json to_json(const EncoderSpec& s) {
  return json{{"backbone", s.backbone == BackboneKind::mlp ? "mlp" : "small_conv"},
              {"input_dim", s.input_dim},
              {"input_shape", s.input_shape},
              {"backbone_widths", s.backbone_widths},
              {"projection", to_json(s.projection)},
              {"output_dim", s.output_dim}};
}

inline EncoderSpec encoder_spec_from_json(const json& j) {
  EncoderSpec s;
  const std::string kind = j.at("backbone").get<std::string>();
  if (kind == "mlp")
    s.backbone = BackboneKind::mlp;
  else if (kind == "small_conv")
    s.backbone = BackboneKind::small_conv;
  else
    throw std::invalid_argument("encoder spec: unknown backbone '" + kind + "'");
  s.input_dim = j.at("input_dim").get<Index>();
  s.input_shape = j.at("input_shape").get<std::array<Index, 3>>();
  s.backbone_widths = j.at("backbone_widths").get<std::vector<Index>>();
  s.projection = mlp_spec_from_json(j.at("projection"));
  s.output_dim = j.at("output_dim").get<Index>();
  return s;
}

inline PredictorMode predictor_mode_from_string(const std::string& s) {
  if (s == "learned") return PredictorMode::learned;
  if (s == "identity") return PredictorMode::identity;
  if (s == "frozen_random") return PredictorMode::frozen_random;
  throw std::invalid_argument("unknown predictor mode '" + s + "'");
}

// ---- checkpoint container -------------------------------------------------
//
// Versioned JSON container: model structure plus flat parameter arrays and
// batchnorm running statistics, keyed by parameter/layer name. Doubles are
// serialized with round-trip precision, so a f64 checkpoint restores
// bit-exactly. Layout documented in docs/formats.md.

inline constexpr int kCheckpointVersion = 1;

template <typename Scalar>
json checkpoint_to_json(SimSiamModel<Scalar>& model) {
  json j;
  j["format"] = "simsiam-checkpoint";
  j["version"] = kCheckpointVersion;
  j["precision"] = sizeof(Scalar) == 8 ? "f64" : "f32";
  j["encoder_spec"] = to_json(model.encoder.spec());
  json pred;
  pred["mode"] = to_string(model.predictor_mode);
  if (model.predictor) pred["spec"] = to_json(model.predictor->spec());
  j["predictor"] = pred;

  json params = json::object();
  for (auto* p : model.params()) {
    params[p->name] = {
        {"shape", p->value.shape()},
        {"data", std::vector<double>(p->value.data(), p->value.data() + p->value.numel())}};
  }
  j["params"] = params;

  json bn = json::object();
  for (auto* layer : model.bn_layers()) {
    bn[layer->name()] = {
        {"mean", std::vector<double>(layer->state.running_mean.data(),
                                     layer->state.running_mean.data() +
                                         layer->state.running_mean.numel())},
        {"var", std::vector<double>(layer->state.running_var.data(),
                                    layer->state.running_var.data() +
                                        layer->state.running_var.numel())}};
  }
  j["bn_running"] = bn;
  return j;
}

template <typename Scalar>
void save_checkpoint(SimSiamModel<Scalar>& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out << checkpoint_to_json(model).dump(2) << "\n";
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

template <typename Scalar>
std::unique_ptr<SimSiamModel<Scalar>> checkpoint_from_json(const json& j) {
  if (j.value("format", "") != "simsiam-checkpoint")
    throw std::invalid_argument("checkpoint: missing/unknown format tag");
  if (j.at("version").get<int>() != kCheckpointVersion)
    throw std::invalid_argument("checkpoint: unsupported version " +
                                std::to_string(j.at("version").get<int>()));
  EncoderSpec espec = encoder_spec_from_json(j.at("encoder_spec"));
  const json& pred = j.at("predictor");
  const PredictorMode mode = predictor_mode_from_string(pred.at("mode").get<std::string>());
  Index hidden = 0;
  bool bn_hidden = true, bn_output = false;
  if (mode != PredictorMode::identity) {
    MlpSpec ps = mlp_spec_from_json(pred.at("spec"));
    hidden = ps.layer_dims.at(1);
    bn_hidden = ps.bn_hidden;
    bn_output = ps.bn_output;
  }
  auto model = std::make_unique<SimSiamModel<Scalar>>(std::move(espec), mode, hidden, bn_hidden,
                                                      bn_output);

  const json& params = j.at("params");
  for (auto* p : model->params()) {
    if (!params.contains(p->name))
      throw std::invalid_argument("checkpoint: missing parameter '" + p->name + "'");
    const json& entry = params.at(p->name);
    const Shape shape = entry.at("shape").get<Shape>();
    if (shape != p->value.shape())
      throw std::invalid_argument("checkpoint: shape mismatch for '" + p->name + "'");
    const auto data = entry.at("data").get<std::vector<double>>();
    if (static_cast<Index>(data.size()) != p->value.numel())
      throw std::invalid_argument("checkpoint: size mismatch for '" + p->name + "'");
    for (Index i = 0; i < p->value.numel(); ++i)
      p->value.flat()[i] = static_cast<Scalar>(data[static_cast<std::size_t>(i)]);
  }
  if (mode == PredictorMode::frozen_random)
    for (auto* p : model->predictor_params()) p->trainable = false;

  const json& bn = j.at("bn_running");
  for (auto* layer : model->bn_layers()) {
    if (!bn.contains(layer->name()))
      throw std::invalid_argument("checkpoint: missing BN state '" + layer->name() + "'");
    const json& entry = bn.at(layer->name());
    const auto mean = entry.at("mean").get<std::vector<double>>();
    const auto var = entry.at("var").get<std::vector<double>>();
    if (static_cast<Index>(mean.size()) != layer->channels())
      throw std::invalid_argument("checkpoint: BN size mismatch for '" + layer->name() + "'");
    for (Index i = 0; i < layer->channels(); ++i) {
      layer->state.running_mean.flat()[i] = static_cast<Scalar>(mean[static_cast<std::size_t>(i)]);
      layer->state.running_var.flat()[i] = static_cast<Scalar>(var[static_cast<std::size_t>(i)]);
    }
  }
  return model;
}

template <typename Scalar>
std::unique_ptr<SimSiamModel<Scalar>> load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  json j;
  in >> j;
  return checkpoint_from_json<Scalar>(j);
}

}  // namespace simsiam

#endif  // SIMSIAM_CHECKPOINT_HPP
