#ifndef SIMSIAM_MODEL_HPP
#define SIMSIAM_MODEL_HPP

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "simsiam/layers.hpp"

namespace simsiam {

enum class BackboneKind { mlp, small_conv };

// The encoder f: a backbone plus a projection MLP, weight-shared across both
// views. Backbones are deliberately small: an MLP for vector data and a
// 3-block conv net for 32x32 images.
struct EncoderSpec {
  BackboneKind backbone = BackboneKind::mlp;
  Index input_dim = 32;                          // vector data
  std::array<Index, 3> input_shape{3, 32, 32};   // image data (C, H, W)
  std::vector<Index> backbone_widths{128, 128};  // fc widths or conv channels
  MlpSpec projection;                            // [backbone_out, ..., output_dim]
  Index output_dim = 64;

  friend bool operator==(const EncoderSpec&, const EncoderSpec&) = default;
};

// Default 3-fc projection head matching the baseline placement: BN on every
// fc including the output fc, no ReLU on the output.
inline MlpSpec default_projection_spec(Index backbone_out, std::vector<Index> hidden, Index d) {
  MlpSpec s;
  s.layer_dims.push_back(backbone_out);
  for (Index h : hidden) s.layer_dims.push_back(h);
  s.layer_dims.push_back(d);
  s.bn_hidden = true;
  s.bn_output = true;
  s.bn_output_affine = true;
  return s;
}

template <typename Scalar>
class Encoder {
 public:
  explicit Encoder(EncoderSpec spec)
      : spec_(std::move(spec)),
        projection_(build_projection_mlp<Scalar>(spec_.projection, "encoder.proj")) {
    if (spec_.backbone_widths.empty())
      throw std::invalid_argument("Encoder: backbone_widths must not be empty");
    if (spec_.projection.layer_dims.back() != spec_.output_dim)
      throw std::invalid_argument("Encoder: projection output width " +
                                  std::to_string(spec_.projection.layer_dims.back()) +
                                  " != output_dim " + std::to_string(spec_.output_dim));
    if (spec_.projection.layer_dims.front() != spec_.backbone_widths.back())
      throw std::invalid_argument("Encoder: projection input width " +
                                  std::to_string(spec_.projection.layer_dims.front()) +
                                  " != backbone output " +
                                  std::to_string(spec_.backbone_widths.back()));
    if (spec_.backbone == BackboneKind::mlp) {
      Index in = spec_.input_dim;
      for (std::size_t i = 0; i < spec_.backbone_widths.size(); ++i) {
        const Index out = spec_.backbone_widths[i];
        fc_.emplace_back(in, out, "encoder.backbone.fc" + std::to_string(i));
        fc_bn_.emplace_back(out, true, "encoder.backbone.bn" + std::to_string(i));
        in = out;
      }
    } else {
      Index ch = spec_.input_shape[0];
      Index hw = spec_.input_shape[1];
      for (std::size_t i = 0; i < spec_.backbone_widths.size(); ++i) {
        const Index out = spec_.backbone_widths[i];
        conv_.emplace_back(ch, out, 3, 1, 1, "encoder.backbone.conv" + std::to_string(i));
        conv_bn_.emplace_back(out, true, "encoder.backbone.bn" + std::to_string(i));
        ch = out;
        if (hw % 2 != 0)
          throw std::invalid_argument("Encoder: input side " +
                                      std::to_string(spec_.input_shape[1]) +
                                      " not divisible by 2^" +
                                      std::to_string(spec_.backbone_widths.size()));
        hw /= 2;
      }
    }
  }

  // Backbone features (pre-projection); the monitor's feature source.
  Var<Scalar> backbone_forward(Tape<Scalar>& t, Var<Scalar> x, Mode mode) {
    if (spec_.backbone == BackboneKind::mlp) {
      for (std::size_t i = 0; i < fc_.size(); ++i) {
        x = fc_[i].forward(t, x);
        x = fc_bn_[i].forward(t, x, mode);
        x = relu(x);
      }
      return x;
    }
    for (std::size_t i = 0; i < conv_.size(); ++i) {
      x = conv_[i].forward(t, x);
      const Shape spatial = x.shape();
      Var<Scalar> rows = nchw_to_rows(x);
      rows = conv_bn_[i].forward(t, rows, mode);
      x = rows_to_nchw(rows, spatial);
      x = relu(x);
      x = avg_pool2d(x, 2);
    }
    return global_avg_pool(x);
  }

  Var<Scalar> forward(Tape<Scalar>& t, Var<Scalar> x, Mode mode) {
    return projection_.forward(t, backbone_forward(t, x, mode), mode);
  }

  void init(SplitRng& rng, const InitConfig& cfg) {
    for (auto& fc : fc_) fc.init(rng, cfg);
    for (auto& bn : fc_bn_) bn.init();
    for (auto& cv : conv_) cv.init(rng, cfg);
    for (auto& bn : conv_bn_) bn.init();
    projection_.init(rng, cfg);
  }

  std::vector<Parameter<Scalar>*> params() {
    std::vector<Parameter<Scalar>*> out;
    for (auto& fc : fc_) {
      out.push_back(&fc.weight);
      out.push_back(&fc.bias);
    }
    for (auto& cv : conv_) {
      out.push_back(&cv.weight);
      out.push_back(&cv.bias);
    }
    for (auto& bn : fc_bn_) {
      out.push_back(&bn.gamma);
      out.push_back(&bn.beta);
    }
    for (auto& bn : conv_bn_) {
      out.push_back(&bn.gamma);
      out.push_back(&bn.beta);
    }
    for (auto* p : projection_.params()) out.push_back(p);
    return out;
  }

  std::vector<BatchNorm<Scalar>*> bn_layers() {
    std::vector<BatchNorm<Scalar>*> out;
    for (auto& bn : fc_bn_) out.push_back(&bn);
    for (auto& bn : conv_bn_) out.push_back(&bn);
    for (auto* bn : projection_.bn_layers()) out.push_back(bn);
    return out;
  }

  const EncoderSpec& spec() const { return spec_; }
  Index feature_dim() const { return spec_.backbone_widths.back(); }
  Index output_dim() const { return spec_.output_dim; }

 private:
  EncoderSpec spec_;
  std::vector<Linear<Scalar>> fc_;
  std::vector<BatchNorm<Scalar>> fc_bn_;
  std::vector<Conv2d<Scalar>> conv_;
  std::vector<BatchNorm<Scalar>> conv_bn_;
  Mlp<Scalar> projection_;
};

enum class PredictorMode { learned, identity, frozen_random };

inline const char* to_string(PredictorMode m) {
  switch (m) {
    case PredictorMode::learned: return "learned";
    case PredictorMode::identity: return "identity";
    case PredictorMode::frozen_random: return "frozen_random";
  }
  return "?";
}

// Encoder + prediction head. One parameter set, applied to both views.
template <typename Scalar>
class SimSiamModel {
 public:
  SimSiamModel(EncoderSpec espec, PredictorMode mode, Index predictor_hidden = 0,
               bool predictor_bn_hidden = true, bool predictor_bn_output = false)
      : encoder(std::move(espec)), predictor_mode(mode) {
    const Index d = encoder.output_dim();
    if (mode != PredictorMode::identity) {
      const Index hidden = predictor_hidden > 0 ? predictor_hidden : std::max<Index>(1, d / 4);
      predictor.emplace(build_prediction_mlp<Scalar>(d, hidden, predictor_bn_hidden,
                                                     predictor_bn_output));
    }
  }

  std::vector<Parameter<Scalar>*> params() {
    auto out = encoder.params();
    if (predictor)
      for (auto* p : predictor->params()) out.push_back(p);
    return out;
  }

  std::vector<Parameter<Scalar>*> predictor_params() {
    return predictor ? predictor->params() : std::vector<Parameter<Scalar>*>{};
  }

  std::vector<BatchNorm<Scalar>*> bn_layers() {
    auto out = encoder.bn_layers();
    if (predictor)
      for (auto* bn : predictor->bn_layers()) out.push_back(bn);
    return out;
  }

  Encoder<Scalar> encoder;
  std::optional<Mlp<Scalar>> predictor;
  PredictorMode predictor_mode;
};

// Deterministic per seed: parameters are drawn in a fixed layer order from a
// single derived stream. A frozen-random predictor is initialized like any
// other and then excluded from training.
template <typename Scalar>
void init_params(SimSiamModel<Scalar>& model, std::uint64_t seed, const InitConfig& cfg = {}) {
  SplitRng rng(seed, {rng_path::init});
  model.encoder.init(rng, cfg);
  if (model.predictor) {
    model.predictor->init(rng, cfg);
    const bool trainable = model.predictor_mode != PredictorMode::frozen_random;
    for (auto* p : model.predictor->params()) p->trainable = trainable;
  }
}

template <typename Scalar>
struct SiameseOutputs {
  Var<Scalar> z1, z2, p1, p2;
};

// Both views through the same parameter set; with an identity predictor the
// prediction handles alias the projections.
template <typename Scalar>
SiameseOutputs<Scalar> forward_simsiam(Tape<Scalar>& t, SimSiamModel<Scalar>& model,
                                       const Tensor<Scalar>& view1, const Tensor<Scalar>& view2,
                                       Mode mode) {
  if (view1.shape() != view2.shape())
    throw ShapeError("forward_simsiam: view shapes differ, " + shape_str(view1.shape()) + " vs " +
                     shape_str(view2.shape()));
  SiameseOutputs<Scalar> out;
  out.z1 = model.encoder.forward(t, t.constant(view1), mode);
  out.z2 = model.encoder.forward(t, t.constant(view2), mode);
  out.p1 = model.predictor ? model.predictor->forward(t, out.z1, mode) : out.z1;
  out.p2 = model.predictor ? model.predictor->forward(t, out.z2, mode) : out.z2;
  return out;
}

}  // namespace simsiam

#endif  // SIMSIAM_MODEL_HPP
