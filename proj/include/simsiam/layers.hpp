#ifndef SIMSIAM_LAYERS_HPP
#define SIMSIAM_LAYERS_HPP

#include <string>
#include <utility>
#include <vector>

#include "simsiam/ops.hpp"
#include "simsiam/rng.hpp"

namespace simsiam {

template <typename Scalar>
void fill_uniform(Tensor<Scalar>& t, SplitRng& rng, double lo, double hi) {
  for (Index i = 0; i < t.numel(); ++i) t.flat()[i] = static_cast<Scalar>(rng.uniform(lo, hi));
}

template <typename Scalar>
void fill_normal(Tensor<Scalar>& t, SplitRng& rng, double stddev) {
  for (Index i = 0; i < t.numel(); ++i) t.flat()[i] = static_cast<Scalar>(stddev * rng.normal());
}

struct InitConfig {
  enum class Scheme {
    uniform_fan_in,  // U(-sqrt(k), sqrt(k)), k = 1/fan_in, for weight and bias
    fixed_std,       // N(0, std) weights, zero bias; known-bad ablation
  };
  Scheme scheme = Scheme::uniform_fan_in;
  double fixed_std = 0.01;

  friend bool operator==(const InitConfig&, const InitConfig&) = default;
};

// ---------------------------------------------------------------------------

template <typename Scalar>
class Linear {
 public:
  Linear(Index in, Index out, std::string name)
      : weight{name + ".weight", Tensor<Scalar>::zeros({in, out})},
        bias{name + ".bias", Tensor<Scalar>::zeros({out})},
        in_(in),
        out_(out) {
    if (in < 1 || out < 1)
      throw std::invalid_argument("Linear: dims must be >= 1, got " + std::to_string(in) + "x" +
                                  std::to_string(out));
  }

  Var<Scalar> forward(Tape<Scalar>& t, Var<Scalar> x) {
    return affine(x, t.param(weight), t.param(bias));
  }

  void init(SplitRng& rng, const InitConfig& cfg) {
    if (cfg.scheme == InitConfig::Scheme::uniform_fan_in) {
      const double bound = std::sqrt(1.0 / static_cast<double>(in_));
      fill_uniform(weight.value, rng, -bound, bound);
      fill_uniform(bias.value, rng, -bound, bound);
    } else {
      fill_normal(weight.value, rng, cfg.fixed_std);
      bias.value.flat().setZero();
    }
  }

  Index in_features() const { return in_; }
  Index out_features() const { return out_; }

  Parameter<Scalar> weight, bias;

 private:
  Index in_, out_;
};

template <typename Scalar>
class BatchNorm {
 public:
  BatchNorm(Index channels, bool affine, std::string name)
      : gamma{name + ".gamma", Tensor<Scalar>::ones({channels})},
        beta{name + ".beta", Tensor<Scalar>::zeros({channels})},
        state(channels),
        channels_(channels),
        affine_(affine),
        name_(std::move(name)) {}

  Var<Scalar> forward(Tape<Scalar>& t, Var<Scalar> x, Mode mode) {
    if (affine_) return batchnorm(x, t.param(gamma), t.param(beta), state, mode, momentum, eps);
    return batchnorm(x, state, mode, momentum, eps);
  }

  void init() {
    gamma.value = Tensor<Scalar>::ones({channels_});
    beta.value = Tensor<Scalar>::zeros({channels_});
    state = BatchNormState<Scalar>(channels_);
  }

  bool affine() const { return affine_; }
  Index channels() const { return channels_; }
  const std::string& name() const { return name_; }

  Parameter<Scalar> gamma, beta;
  BatchNormState<Scalar> state;
  Scalar momentum = Scalar(0.1);
  Scalar eps = Scalar(1e-5);

 private:
  Index channels_;
  bool affine_;
  std::string name_;
};

template <typename Scalar>
class Conv2d {
 public:
  Conv2d(Index in_ch, Index out_ch, int ksize, int stride, int pad, std::string name)
      : weight{name + ".weight", Tensor<Scalar>::zeros({out_ch, in_ch, ksize, ksize})},
        bias{name + ".bias", Tensor<Scalar>::zeros({out_ch})},
        in_ch_(in_ch),
        ksize_(ksize),
        stride_(stride),
        pad_(pad) {}

  Var<Scalar> forward(Tape<Scalar>& t, Var<Scalar> x) {
    return conv2d(x, t.param(weight), t.param(bias), stride_, pad_);
  }

  void init(SplitRng& rng, const InitConfig& cfg) {
    if (cfg.scheme == InitConfig::Scheme::uniform_fan_in) {
      const double bound = std::sqrt(1.0 / static_cast<double>(in_ch_ * ksize_ * ksize_));
      fill_uniform(weight.value, rng, -bound, bound);
      fill_uniform(bias.value, rng, -bound, bound);
    } else {
      fill_normal(weight.value, rng, cfg.fixed_std);
      bias.value.flat().setZero();
    }
  }

  Parameter<Scalar> weight, bias;

 private:
  Index in_ch_;
  int ksize_, stride_, pad_;
};

// ---------------------------------------------------------------------------
// MLP heads
// ---------------------------------------------------------------------------

struct MlpSpec {
  std::vector<Index> layer_dims;  // [in, hidden..., out]; one fc per adjacent pair
  bool bn_hidden = true;
  bool bn_output = false;
  bool bn_output_affine = true;
  bool relu_output = false;  // output fc never gets ReLU

  Index num_layers() const { return static_cast<Index>(layer_dims.size()) - 1; }
  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

// Stack of [fc -> BN? -> ReLU] blocks with a final [fc -> BN?] whose output
// has no ReLU. Covers every BN-placement variant of the projection and
// prediction heads.
template <typename Scalar>
class Mlp {
 public:
  Mlp(MlpSpec spec, std::string name) : spec_(std::move(spec)), name_(std::move(name)) {
    if (spec_.layer_dims.size() < 2)
      throw std::invalid_argument("Mlp: need at least one fc layer (2 dims), got " +
                                  shape_str(spec_.layer_dims));
    for (Index d : spec_.layer_dims)
      if (d < 1) throw std::invalid_argument("Mlp: non-positive layer dim in " +
                                             shape_str(spec_.layer_dims));
    if (spec_.relu_output)
      throw std::invalid_argument("Mlp: relu_output is not supported (output fc has no ReLU)");
    const Index L = spec_.num_layers();
    for (Index i = 0; i < L; ++i) {
      fc_.emplace_back(spec_.layer_dims[static_cast<std::size_t>(i)],
                       spec_.layer_dims[static_cast<std::size_t>(i + 1)],
                       name_ + ".fc" + std::to_string(i));
      const bool is_output = i == L - 1;
      if (is_output ? spec_.bn_output : spec_.bn_hidden)
        bn_.emplace_back(spec_.layer_dims[static_cast<std::size_t>(i + 1)],
                         is_output ? spec_.bn_output_affine : true,
                         name_ + ".bn" + std::to_string(i));
      bn_index_.push_back((is_output ? spec_.bn_output : spec_.bn_hidden)
                              ? static_cast<Index>(bn_.size()) - 1
                              : -1);
    }
  }

  Var<Scalar> forward(Tape<Scalar>& t, Var<Scalar> x, Mode mode) {
    const Index L = spec_.num_layers();
    for (Index i = 0; i < L; ++i) {
      x = fc_[static_cast<std::size_t>(i)].forward(t, x);
      const Index b = bn_index_[static_cast<std::size_t>(i)];
      if (b >= 0) x = bn_[static_cast<std::size_t>(b)].forward(t, x, mode);
      if (i < L - 1) x = relu(x);
    }
    return x;
  }

  void init(SplitRng& rng, const InitConfig& cfg) {
    for (auto& fc : fc_) fc.init(rng, cfg);
    for (auto& bn : bn_) bn.init();
  }

  std::vector<Parameter<Scalar>*> params() {
    std::vector<Parameter<Scalar>*> out;
    for (auto& fc : fc_) {
      out.push_back(&fc.weight);
      out.push_back(&fc.bias);
    }
    for (auto& bn : bn_)
      if (bn.affine()) {
        out.push_back(&bn.gamma);
        out.push_back(&bn.beta);
      }
    return out;
  }

  std::vector<BatchNorm<Scalar>*> bn_layers() {
    std::vector<BatchNorm<Scalar>*> out;
    for (auto& bn : bn_) out.push_back(&bn);
    return out;
  }

  const MlpSpec& spec() const { return spec_; }
  Index in_dim() const { return spec_.layer_dims.front(); }
  Index out_dim() const { return spec_.layer_dims.back(); }
  const std::string& name() const { return name_; }

 private:
  MlpSpec spec_;
  std::string name_;
  std::vector<Linear<Scalar>> fc_;
  std::vector<BatchNorm<Scalar>> bn_;
  std::vector<Index> bn_index_;  // per fc layer: index into bn_ or -1
};

// Projection head: [fc -> BN -> ReLU] x (n-1) then [fc -> BN], per the BN
// placement flags. Requires at least 2 fc layers.
template <typename Scalar>
Mlp<Scalar> build_projection_mlp(MlpSpec spec, std::string name = "proj") {
  if (spec.num_layers() < 2)
    throw std::invalid_argument("build_projection_mlp: at least 2 fc layers required, got " +
                                std::to_string(spec.num_layers()));
  return Mlp<Scalar>(std::move(spec), std::move(name));
}

// Prediction head: fc d->hidden -> BN -> ReLU -> fc hidden->d. The bottleneck
// (hidden = d/4) is the robust default; output BN is off unless explicitly
// enabled for the "all-BN" ablation.
template <typename Scalar>
Mlp<Scalar> build_prediction_mlp(Index d, Index hidden, bool bn_hidden = true,
                                 bool bn_output = false, std::string name = "pred") {
  MlpSpec spec;
  spec.layer_dims = {d, hidden, d};
  spec.bn_hidden = bn_hidden;
  spec.bn_output = bn_output;
  return Mlp<Scalar>(std::move(spec), std::move(name));
}

}  // namespace simsiam

#endif  // SIMSIAM_LAYERS_HPP
