#ifndef SIMSIAM_LOSSES_HPP
#define SIMSIAM_LOSSES_HPP

#include "simsiam/model.hpp"
#include "simsiam/ops.hpp"

namespace simsiam {

enum class Similarity { cosine, cross_entropy };
enum class Symmetry { symmetric, asymmetric, asymmetric_2x };

struct LossConfig {
  Similarity similarity = Similarity::cosine;
  Symmetry symmetry = Symmetry::symmetric;
  bool stop_grad = true;
  PredictorMode predictor_mode = PredictorMode::learned;

  friend bool operator==(const LossConfig&, const LossConfig&) = default;
};

// D(p, z) = mean over the batch of -<p/|p|, z/|z|>; in [-1, 1].
template <typename Scalar>
Var<Scalar> negative_cosine(Var<Scalar> p, Var<Scalar> z) {
  detail::require_rank(p, 2, "negative_cosine");
  detail::require_same_shape(p, z, "negative_cosine");
  const Index batch = p.value().rows();
  return scale(sum(l2_normalize(p) * l2_normalize(z)), -1.0 / static_cast<double>(batch));
}

// D(p, z) = mean over the batch of -softmax(z) . log_softmax(p), softmax
// along the channel dimension.
template <typename Scalar>
Var<Scalar> cross_entropy_similarity(Var<Scalar> p, Var<Scalar> z) {
  detail::require_rank(p, 2, "cross_entropy_similarity");
  detail::require_same_shape(p, z, "cross_entropy_similarity");
  const Index batch = p.value().rows();
  return scale(sum(softmax(z) * log_softmax(p)), -1.0 / static_cast<double>(batch));
}

namespace detail {

template <typename Scalar>
Var<Scalar> similarity_term(Var<Scalar> p, Var<Scalar> z, const LossConfig& cfg) {
  Var<Scalar> target = cfg.stop_grad ? stop_gradient(z) : z;
  return cfg.similarity == Similarity::cosine ? negative_cosine(p, target)
                                              : cross_entropy_similarity(p, target);
}

}  // namespace detail

// Symmetric: 0.5*D(p1, sg(z2)) + 0.5*D(p2, sg(z1)); asymmetric: D(p1, sg(z2));
// with stop_grad disabled the target branch stays live. The two-pair overload
// below handles asymmetric_2x.
template <typename Scalar>
Var<Scalar> simsiam_loss(const SiameseOutputs<Scalar>& out, const LossConfig& cfg) {
  switch (cfg.symmetry) {
    case Symmetry::symmetric:
      return scale(detail::similarity_term(out.p1, out.z2, cfg) +
                       detail::similarity_term(out.p2, out.z1, cfg),
                   0.5);
    case Symmetry::asymmetric:
      return detail::similarity_term(out.p1, out.z2, cfg);
    case Symmetry::asymmetric_2x:
      throw std::invalid_argument(
          "simsiam_loss: asymmetric_2x needs two view pairs; use the two-pair overload");
  }
  throw std::logic_error("simsiam_loss: bad symmetry");
}

// Two independently augmented pairs of the same images; the average of their
// asymmetric terms compensates for the extra prediction of symmetrization.
template <typename Scalar>
Var<Scalar> simsiam_loss(const SiameseOutputs<Scalar>& pair_a, const SiameseOutputs<Scalar>& pair_b,
                         const LossConfig& cfg) {
  if (cfg.symmetry != Symmetry::asymmetric_2x)
    throw std::invalid_argument("simsiam_loss: two-pair overload is for asymmetric_2x");
  return scale(detail::similarity_term(pair_a.p1, pair_a.z2, cfg) +
                   detail::similarity_term(pair_b.p1, pair_b.z2, cfg),
               0.5);
}

}  // namespace simsiam

#endif  // SIMSIAM_LOSSES_HPP
