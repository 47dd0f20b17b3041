#ifndef SIMSIAM_ETA_HPP
#define SIMSIAM_ETA_HPP

#include <fstream>
#include <new>
#include <vector>

#include <json.hpp>

#include "simsiam/config.hpp"
#include "simsiam/model.hpp"
#include "simsiam/optimizer.hpp"

namespace simsiam {

// Per-image target variables of the alternating formulation: one d-vector
// per training image, updated outside the gradient path (they are the
// argument of the other sub-problem, never tape parameters).
template <typename Scalar>
class EtaBank {
 public:
  EtaBank(long num_images, Index dim) : dim_(dim) {
    if (num_images < 1 || dim < 1)
      throw std::invalid_argument("EtaBank: need positive image count and dimension");
    try {
      data_.setZero(num_images, dim);
    } catch (const std::bad_alloc&) {
      throw std::runtime_error("EtaBank: bank of " + std::to_string(num_images) + " x " +
                               std::to_string(dim) + " entries exceeds available memory");
    }
  }

  long size() const { return data_.rows(); }
  Index dim() const { return dim_; }

  Eigen::Ref<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>> get(long id) const {
    check(id);
    return data_.row(id);
  }

  void assign(long id, Eigen::Ref<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>> rep) {
    check(id);
    data_.row(id) = rep;
  }

  // direct_assign replaces; moving_average blends eta <- m*eta + (1-m)*rep.
  void update(long id, Eigen::Ref<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>> rep,
              EtaUpdateMode mode, double m) {
    check(id);
    if (mode == EtaUpdateMode::direct_assign) {
      data_.row(id) = rep;
    } else {
      data_.row(id) = static_cast<Scalar>(m) * data_.row(id) + static_cast<Scalar>(1.0 - m) * rep;
    }
  }

  // Batch of eta rows for the given image ids, in order.
  Tensor<Scalar> gather(const std::vector<long>& ids) const {
    Tensor<Scalar> out({static_cast<Index>(ids.size()), dim_});
    for (std::size_t i = 0; i < ids.size(); ++i) {
      check(ids[i]);
      out.mat().row(static_cast<Index>(i)) = data_.row(ids[i]);
    }
    return out;
  }

  // Snapshot format: versioned JSON, image id -> vector (docs/formats.md).
  void save(const std::string& path) const {
    json j;
    j["format"] = "simsiam-eta-bank";
    j["version"] = 1;
    j["dim"] = dim_;
    json entries = json::array();
    for (long id = 0; id < size(); ++id)
      entries.push_back({{"id", id},
                         {"eta", std::vector<double>(data_.row(id).begin(), data_.row(id).end())}});
    j["entries"] = std::move(entries);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("EtaBank::save: cannot open " + path);
    out << j.dump() << "\n";
  }

  static EtaBank load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("EtaBank::load: cannot open " + path);
    json j;
    in >> j;
    if (j.value("format", "") != "simsiam-eta-bank")
      throw std::invalid_argument("EtaBank::load: not a bank snapshot");
    const Index dim = j.at("dim").get<Index>();
    const auto& entries = j.at("entries");
    EtaBank bank(static_cast<long>(entries.size()), dim);
    for (const auto& e : entries) {
      const long id = e.at("id").get<long>();
      const auto v = e.at("eta").get<std::vector<double>>();
      if (static_cast<Index>(v.size()) != dim)
        throw std::invalid_argument("EtaBank::load: entry dimension mismatch");
      for (Index c = 0; c < dim; ++c)
        bank.data_(id, c) = static_cast<Scalar>(v[static_cast<std::size_t>(c)]);
    }
    return bank;
  }

 private:
  void check(long id) const {
    if (id < 0 || id >= size())
      throw std::out_of_range("EtaBank: unknown image id " + std::to_string(id));
  }

  MatrixR<Scalar> data_;
  Index dim_;
};

// Row-normalize with the same epsilon guard as the l2_normalize op; used
// when representations are normalized before entering the bank.
template <typename Scalar>
void normalize_rows(Tensor<Scalar>& t) {
  auto M = t.mat();
  for (Index r = 0; r < M.rows(); ++r) {
    const Scalar n = M.row(r).norm();
    M.row(r) /= std::max(n, static_cast<Scalar>(kNormalizeEps));
  }
}

// Mean representation over a set of augmentation draws (the eta sub-problem
// solution; one draw is the single-sample approximation). The forward
// functor maps one input tensor to its representation.
template <typename Scalar, typename ForwardFn>
Tensor<Scalar> eta_solve(ForwardFn&& forward, const std::vector<Tensor<Scalar>>& augmentation_draws) {
  if (augmentation_draws.empty())
    throw std::invalid_argument("eta_solve: need at least one augmentation draw");
  Tensor<Scalar> acc = forward(augmentation_draws.front());
  for (std::size_t i = 1; i < augmentation_draws.size(); ++i) {
    Tensor<Scalar> rep = forward(augmentation_draws[i]);
    if (!rep.same_shape(acc)) throw ShapeError("eta_solve: inconsistent representation shapes");
    acc.flat() += rep.flat();
  }
  acc.flat() /= static_cast<Scalar>(augmentation_draws.size());
  return acc;
}

// Per-image convenience overload running the encoder in eval mode.
template <typename Scalar>
Tensor<Scalar> eta_solve(Encoder<Scalar>& encoder,
                         const std::vector<Tensor<Scalar>>& augmentation_draws) {
  return eta_solve<Scalar>(
      [&](const Tensor<Scalar>& view) {
        Shape batched;
        batched.push_back(1);
        for (Index d : view.shape()) batched.push_back(d);
        Tape<Scalar> tape;
        auto z = encoder.forward(tape, tape.constant(view.reshaped(batched)), Mode::eval);
        return Tensor<Scalar>({z.value().cols()}, z.value().flat());
      },
      augmentation_draws);
}

template <typename Scalar>
struct SubstepParts {
  Var<Scalar> z;     // encoder output for the batch
  Var<Scalar> eta;   // constant leaf holding the cached targets
  Var<Scalar> loss;  // scalar
};

// Builds the theta sub-problem objective on the given tape. eta enters as a
// plain constant: the stop-gradient here is structural, the targets are
// simply not differentiable tape citizens.
template <typename Scalar>
SubstepParts<Scalar> build_substep_graph(Tape<Scalar>& tape, Encoder<Scalar>& encoder,
                                         const Tensor<Scalar>& view_batch,
                                         const Tensor<Scalar>& eta_batch, AlternationLoss loss_kind,
                                         Mode mode = Mode::train) {
  SubstepParts<Scalar> parts;
  parts.z = encoder.forward(tape, tape.constant(view_batch), mode);
  if (parts.z.value().shape() != eta_batch.shape())
    throw ShapeError("theta_substep: eta batch " + shape_str(eta_batch.shape()) +
                     " does not match encoder output " + shape_str(parts.z.value().shape()));
  parts.eta = tape.constant(eta_batch);
  const Index batch = eta_batch.rows();
  if (loss_kind == AlternationLoss::mse) {
    auto diff = parts.z - parts.eta;
    parts.loss = scale(sum(diff * diff), 1.0 / static_cast<double>(batch));
  } else {
    parts.loss = negative_cosine(parts.z, parts.eta);
  }
  return parts;
}

template <typename Scalar>
struct SubstepOutcome {
  double loss = 0.0;
  double output_std = 0.0;
};

// One SGD step on the theta sub-problem with the cached eta targets held
// fixed. Missing ids surface as errors from the bank gather.
template <typename Scalar>
SubstepOutcome<Scalar> theta_substep(Encoder<Scalar>& encoder, const Tensor<Scalar>& view_batch,
                                     const std::vector<long>& ids, const EtaBank<Scalar>& bank,
                                     const AlternationConfig& alt, const OptimizerConfig& opt,
                                     SgdState<Scalar>& state, double lr) {
  Tensor<Scalar> eta_batch = bank.gather(ids);
  Tape<Scalar> tape;
  SubstepParts<Scalar> parts =
      build_substep_graph(tape, encoder, view_batch, eta_batch, alt.loss);
  GradStore<Scalar> grads = tape.backward(parts.loss);
  std::vector<std::pair<Parameter<Scalar>*, const Tensor<Scalar>*>> group;
  for (auto& b : tape.bindings())
    group.emplace_back(b.param, grads.contains(b.var) ? &grads.at(b.var) : nullptr);
  sgd_step(group, state, lr, opt.momentum, opt.weight_decay);
  state.step += 1;
  SubstepOutcome<Scalar> out;
  out.loss = parts.loss.value().value();
  out.output_std = normalized_output_std(parts.z.value());
  return out;
}

}  // namespace simsiam

#endif  // SIMSIAM_ETA_HPP
