#ifndef SIMSIAM_DIAGNOSTICS_HPP
#define SIMSIAM_DIAGNOSTICS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "simsiam/layers.hpp"
#include "simsiam/ops.hpp"
#include "simsiam/optimizer.hpp"
#include "simsiam/rng.hpp"

namespace simsiam {

struct MetricsRecord {
  long step = 0;
  long epoch = 0;
  double lr = 0.0;
  double loss = std::numeric_limits<double>::quiet_NaN();
  double output_std = 0.0;
  std::optional<double> knn_acc;
  double wallclock_ms = 0.0;
};

// Mean over channels of the per-channel std of the row-normalized batch.
// For collapsed outputs this is ~0; for z with an isotropic Gaussian
// distribution it concentrates near 1/sqrt(d).
template <typename Scalar>
double normalized_output_std(const Tensor<Scalar>& z_batch) {
  if (z_batch.rank() != 2)
    throw ShapeError("normalized_output_std: rank-2 batch required, got " +
                     shape_str(z_batch.shape()));
  const Index n = z_batch.rows(), d = z_batch.cols();
  if (n < 2)
    throw std::invalid_argument("normalized_output_std: batch of " + std::to_string(n) +
                                " rows; need >= 2");
  ArrayRR<double> zn(n, d);
  for (Index r = 0; r < n; ++r) {
    Eigen::Array<double, Eigen::Dynamic, 1> row =
        z_batch.mat().row(r).template cast<double>().transpose().array();
    const double norm = std::sqrt(row.square().sum());
    zn.row(r) = row.transpose() / std::max(norm, kNormalizeEps);
  }
  ArrayX<double> mu = zn.colwise().mean();
  ArrayX<double> var = (zn.rowwise() - mu.transpose()).square().colwise().mean();
  return var.sqrt().mean();
}

// Cosine-similarity weighted kNN vote in the style of the memory-bank
// monitors: weights exp(sim / temperature) over the k nearest train rows.
// Features are row-normalized internally; ties break toward the smaller
// index / class for determinism.
template <typename Scalar>
double knn_monitor(const Tensor<Scalar>& train_feats, const std::vector<int>& train_labels,
                   const Tensor<Scalar>& query_feats, const std::vector<int>& query_labels,
                   int k = 20, double temperature = 0.07) {
  if (train_feats.rank() != 2 || query_feats.rank() != 2)
    throw ShapeError("knn_monitor: rank-2 feature matrices required");
  const Index n = train_feats.rows(), nq = query_feats.rows();
  if (n == 0 || nq == 0) throw std::invalid_argument("knn_monitor: empty feature set");
  if (static_cast<Index>(train_labels.size()) != n ||
      static_cast<Index>(query_labels.size()) != nq)
    throw std::invalid_argument("knn_monitor: label count does not match feature rows");
  if (k < 1 || static_cast<Index>(k) > n)
    throw std::invalid_argument("knn_monitor: k=" + std::to_string(k) + " outside [1, " +
                                std::to_string(n) + "]");
  if (temperature <= 0) throw std::invalid_argument("knn_monitor: temperature must be > 0");

  const int num_classes = 1 + *std::max_element(train_labels.begin(), train_labels.end());

  auto normalize = [](const Tensor<Scalar>& f) {
    MatrixR<double> m = f.mat().template cast<double>();
    for (Index r = 0; r < m.rows(); ++r) {
      const double norm = m.row(r).norm();
      m.row(r) /= std::max(norm, kNormalizeEps);
    }
    return m;
  };
  MatrixR<double> T = normalize(train_feats);
  MatrixR<double> Q = normalize(query_feats);

  long correct = 0;
  std::vector<std::pair<double, Index>> sims(static_cast<std::size_t>(n));
  std::vector<double> scores(static_cast<std::size_t>(num_classes));
  Eigen::VectorXd s(n);
  for (Index q = 0; q < nq; ++q) {
    s.noalias() = T * Q.row(q).transpose();
    for (Index i = 0; i < n; ++i) sims[static_cast<std::size_t>(i)] = {s[i], i};
    auto better = [](const std::pair<double, Index>& a, const std::pair<double, Index>& b) {
      return a.first > b.first || (a.first == b.first && a.second < b.second);
    };
    std::nth_element(sims.begin(), sims.begin() + (k - 1), sims.end(), better);
    std::fill(scores.begin(), scores.end(), 0.0);
    for (int i = 0; i < k; ++i) {
      const auto& [sim, idx] = sims[static_cast<std::size_t>(i)];
      scores[static_cast<std::size_t>(train_labels[static_cast<std::size_t>(idx)])] +=
          std::exp(sim / temperature);
    }
    const int pred = static_cast<int>(
        std::max_element(scores.begin(), scores.end()) - scores.begin());
    if (pred == query_labels[static_cast<std::size_t>(q)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(nq);
}

// ---------------------------------------------------------------------------
// Linear probe: a single affine layer trained with softmax cross-entropy and
// momentum SGD on frozen features; returns held-out accuracy.
// ---------------------------------------------------------------------------

struct ProbeConfig {
  double lr = 0.2;
  double momentum = 0.9;
  double weight_decay = 0.0;
  long epochs = 60;
  long batch_size = 64;
  double holdout_fraction = 0.25;
  std::uint64_t seed = 0;

  friend bool operator==(const ProbeConfig&, const ProbeConfig&) = default;
};

template <typename Scalar>
double linear_probe(const Tensor<Scalar>& feats, const std::vector<int>& labels,
                    const ProbeConfig& cfg = {}) {
  if (feats.rank() != 2) throw ShapeError("linear_probe: rank-2 features required");
  const Index n = feats.rows(), d = feats.cols();
  if (static_cast<Index>(labels.size()) != n)
    throw std::invalid_argument("linear_probe: label count does not match feature rows");
  const int num_classes = labels.empty() ? 0 : 1 + *std::max_element(labels.begin(), labels.end());
  {
    std::vector<bool> seen(static_cast<std::size_t>(std::max(num_classes, 1)), false);
    for (int l : labels) {
      if (l < 0) throw std::invalid_argument("linear_probe: negative label");
      seen[static_cast<std::size_t>(l)] = true;
    }
    if (std::count(seen.begin(), seen.end(), true) < 2)
      throw std::invalid_argument("linear_probe: degenerate label set (need >= 2 classes)");
  }

  SplitRng rng(cfg.seed, {rng_path::probe});
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index(0));
  rng.shuffle(order.begin(), order.end());
  const Index n_hold = std::max<Index>(1, static_cast<Index>(
                                              std::llround(cfg.holdout_fraction *
                                                           static_cast<double>(n))));
  const Index n_train = n - n_hold;
  if (n_train < 1) throw std::invalid_argument("linear_probe: holdout fraction leaves no train");

  Parameter<double> W{"probe.w", Tensor<double>::zeros({d, num_classes})};
  Parameter<double> b{"probe.b", Tensor<double>::zeros({num_classes})};
  fill_uniform(W.value, rng, -std::sqrt(1.0 / static_cast<double>(d)),
               std::sqrt(1.0 / static_cast<double>(d)));

  MatrixR<double> X = feats.mat().template cast<double>();
  SgdState<double> state;
  const long batches_per_epoch = std::max<long>(1, n_train / cfg.batch_size);
  for (long epoch = 0; epoch < cfg.epochs; ++epoch) {
    SplitRng eshuf = rng.child(static_cast<std::uint64_t>(epoch) + 1);
    std::vector<Index> idx(order.begin(), order.begin() + n_train);
    eshuf.shuffle(idx.begin(), idx.end());
    for (long bi = 0; bi < batches_per_epoch; ++bi) {
      const Index lo = static_cast<Index>(bi) * cfg.batch_size;
      const Index bs = std::min<Index>(cfg.batch_size, n_train - lo);
      if (bs < 1) break;
      Tensor<double> xb({bs, d});
      Tensor<double> onehot = Tensor<double>::zeros({bs, static_cast<Index>(num_classes)});
      for (Index r = 0; r < bs; ++r) {
        const Index src = idx[static_cast<std::size_t>(lo + r)];
        xb.mat().row(r) = X.row(src);
        onehot.mat()(r, labels[static_cast<std::size_t>(src)]) = 1.0;
      }
      Tape<double> t;
      auto logits = affine(t.constant(std::move(xb)), t.param(W), t.param(b));
      auto loss = scale(sum(t.constant(std::move(onehot)) * log_softmax(logits)),
                        -1.0 / static_cast<double>(bs));
      auto grads = t.backward(loss);
      std::vector<std::pair<Parameter<double>*, const Tensor<double>*>> group;
      for (auto& bind : t.bindings()) group.emplace_back(bind.param, &grads.at(bind.var));
      // Half-cosine decay over the probe run.
      const long step = state.step;
      const long total = cfg.epochs * batches_per_epoch;
      const double lr =
          cfg.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) /
                                         static_cast<double>(total)));
      sgd_step(group, state, lr, cfg.momentum, cfg.weight_decay);
      state.step += 1;
    }
  }

  long correct = 0;
  for (Index r = n_train; r < n; ++r) {
    const Index src = order[static_cast<std::size_t>(r)];
    Eigen::VectorXd logits =
        W.value.mat().transpose() * X.row(src).transpose() +
        VecMap<double>(b.value.data(), num_classes);
    Index best = 0;
    logits.maxCoeff(&best);
    if (static_cast<int>(best) == labels[static_cast<std::size_t>(src)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n_hold);
}

// ---------------------------------------------------------------------------
// Collapse verdict
// ---------------------------------------------------------------------------

enum class CollapseStatus { collapsed, healthy, diverged, unstable };

inline const char* to_string(CollapseStatus s) {
  switch (s) {
    case CollapseStatus::collapsed: return "collapsed";
    case CollapseStatus::healthy: return "healthy";
    case CollapseStatus::diverged: return "diverged";
    case CollapseStatus::unstable: return "unstable";
  }
  return "?";
}

// Desk-scale calibration; every number is config-exposed. A chance-level
// monitor alone is NOT collapse evidence: the verdict requires both the loss
// floor and a vanished output std.
struct CollapseThresholds {
  long window = 100;           // trailing steps considered
  double loss_floor = -0.99;   // collapsed iff trailing mean loss <= floor ...
  double std_threshold = 0.1 / 8.0;  // ... AND trailing mean std <= 0.1/sqrt(d)
  double osc_threshold = 0.4;  // unstable iff trailing loss max-min exceeds this
  double rise_margin = 0.5;    // diverged iff trailing mean rises this far off its best

  static CollapseThresholds for_dim(Index d) {
    CollapseThresholds t;
    t.std_threshold = 0.1 / std::sqrt(static_cast<double>(d));
    return t;
  }

  friend bool operator==(const CollapseThresholds&, const CollapseThresholds&) = default;
};

struct CollapseVerdict {
  CollapseStatus status = CollapseStatus::healthy;
  double trailing_loss = 0.0;
  double trailing_std = 0.0;
  double loss_trend = 0.0;  // trailing mean minus best windowed mean
  bool nonfinite = false;
};

inline CollapseVerdict collapse_verdict(const std::vector<MetricsRecord>& history,
                                        const CollapseThresholds& th) {
  const long n = static_cast<long>(history.size());
  if (n < th.window)
    throw std::invalid_argument("collapse_verdict: " + std::to_string(n) +
                                " records < window of " + std::to_string(th.window));
  CollapseVerdict v;
  for (const auto& r : history)
    if (!std::isfinite(r.loss)) v.nonfinite = true;

  const auto* tail = history.data() + (n - th.window);
  double loss_sum = 0, std_sum = 0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (long i = 0; i < th.window; ++i) {
    loss_sum += tail[i].loss;
    std_sum += tail[i].output_std;
    lo = std::min(lo, tail[i].loss);
    hi = std::max(hi, tail[i].loss);
  }
  v.trailing_loss = loss_sum / static_cast<double>(th.window);
  v.trailing_std = std_sum / static_cast<double>(th.window);

  // Best (lowest) windowed mean over the whole run, via prefix sums.
  double best = v.trailing_loss;
  if (!v.nonfinite) {
    std::vector<double> prefix(static_cast<std::size_t>(n) + 1, 0.0);
    for (long i = 0; i < n; ++i) prefix[static_cast<std::size_t>(i) + 1] =
        prefix[static_cast<std::size_t>(i)] + history[static_cast<std::size_t>(i)].loss;
    for (long s = 0; s + th.window <= n; ++s) {
      const double m = (prefix[static_cast<std::size_t>(s + th.window)] -
                        prefix[static_cast<std::size_t>(s)]) /
                       static_cast<double>(th.window);
      best = std::min(best, m);
    }
  }
  v.loss_trend = v.trailing_loss - best;

  if (v.nonfinite) {
    v.status = CollapseStatus::diverged;
  } else if (v.trailing_loss <= th.loss_floor && v.trailing_std <= th.std_threshold) {
    v.status = CollapseStatus::collapsed;
  } else if (v.loss_trend > th.rise_margin) {
    v.status = CollapseStatus::diverged;
  } else if (hi - lo > th.osc_threshold) {
    v.status = CollapseStatus::unstable;
  } else {
    v.status = CollapseStatus::healthy;
  }
  return v;
}

}  // namespace simsiam

#endif  // SIMSIAM_DIAGNOSTICS_HPP
