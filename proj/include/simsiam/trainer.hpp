#ifndef SIMSIAM_TRAINER_HPP
#define SIMSIAM_TRAINER_HPP

#include <chrono>
#include <functional>
#include <optional>
#include <unordered_set>

#include "simsiam/augment.hpp"
#include "simsiam/config.hpp"
#include "simsiam/diagnostics.hpp"
#include "simsiam/eta.hpp"
#include "simsiam/losses.hpp"
#include "simsiam/model.hpp"
#include "simsiam/optimizer.hpp"

namespace simsiam {

// Raised when a forward pass turns non-finite: abort-and-record, never
// silent NaN training.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(long step, const std::string& what)
      : std::runtime_error("step " + std::to_string(step) + ": " + what), step(step) {}
  long step;
};

// Deterministic epoch/batch layout: per-epoch shuffle keyed by (seed, epoch),
// complete batches only (the remainder of each epoch is dropped).
class BatchSchedule {
 public:
  BatchSchedule(long num_samples, long batch_size, long epochs, std::uint64_t seed)
      : n_(num_samples), batch_(batch_size), epochs_(epochs), seed_(seed) {
    if (batch_size > num_samples)
      throw std::invalid_argument("batch size " + std::to_string(batch_size) +
                                  " exceeds dataset of " + std::to_string(num_samples));
    steps_per_epoch_ = num_samples / batch_size;
  }

  long steps_per_epoch() const { return steps_per_epoch_; }
  long total_steps() const { return steps_per_epoch_ * epochs_; }
  long epoch_of(long step) const { return step / steps_per_epoch_; }

  std::vector<Index> batch_at(long step) const {
    const long epoch = epoch_of(step);
    if (epoch != cached_epoch_) {
      perm_.resize(static_cast<std::size_t>(n_));
      std::iota(perm_.begin(), perm_.end(), Index(0));
      SplitRng rng(seed_, {rng_path::shuffle, static_cast<std::uint64_t>(epoch)});
      rng.shuffle(perm_.begin(), perm_.end());
      cached_epoch_ = epoch;
    }
    const long k = step % steps_per_epoch_;
    return std::vector<Index>(perm_.begin() + k * batch_, perm_.begin() + (k + 1) * batch_);
  }

 private:
  long n_, batch_, epochs_, steps_per_epoch_;
  std::uint64_t seed_;
  mutable std::vector<Index> perm_;
  mutable long cached_epoch_ = -1;
};

template <typename Scalar>
struct TwoViewBatch {
  Tensor<Scalar> view1, view2;
  std::optional<Tensor<Scalar>> view3, view4;  // second pair for asymmetric_2x
};

struct StepOutcome {
  double loss = 0.0;
  double output_std = 0.0;
};

// One forward + backward + SGD update. The schedule position is taken from
// state.step; encoder and predictor groups may run at different rates.
template <typename Scalar>
StepOutcome train_step(SimSiamModel<Scalar>& model, const TwoViewBatch<Scalar>& batch,
                       const LossConfig& loss_cfg, const OptimizerConfig& opt,
                       SgdState<Scalar>& state, long total_steps) {
  const double lr = lr_at(state.step, opt, total_steps);
  const double pred_lr = predictor_lr_at(state.step, opt, total_steps);
  try {
    Tape<Scalar> tape;
    SiameseOutputs<Scalar> out =
        forward_simsiam(tape, model, batch.view1, batch.view2, Mode::train);
    Var<Scalar> loss;
    if (loss_cfg.symmetry == Symmetry::asymmetric_2x) {
      if (!batch.view3 || !batch.view4)
        throw std::invalid_argument("train_step: asymmetric_2x needs a second view pair");
      SiameseOutputs<Scalar> out_b =
          forward_simsiam(tape, model, *batch.view3, *batch.view4, Mode::train);
      loss = simsiam_loss(out, out_b, loss_cfg);
    } else {
      loss = simsiam_loss(out, loss_cfg);
    }
    GradStore<Scalar> grads = tape.backward(loss);

    std::unordered_set<const Parameter<Scalar>*> pred_set;
    for (auto* p : model.predictor_params()) pred_set.insert(p);
    std::vector<std::pair<Parameter<Scalar>*, const Tensor<Scalar>*>> enc_group, pred_group;
    for (auto& b : tape.bindings()) {
      const Tensor<Scalar>* g = grads.contains(b.var) ? &grads.at(b.var) : nullptr;
      (pred_set.count(b.param) ? pred_group : enc_group).emplace_back(b.param, g);
    }
    sgd_step(enc_group, state, lr, opt.momentum, opt.weight_decay);
    sgd_step(pred_group, state, pred_lr, opt.momentum, opt.weight_decay);
    state.step += 1;

    StepOutcome o;
    o.loss = loss.value().value();
    o.output_std = normalized_output_std(out.z1.value());
    return o;
  } catch (const NonFiniteError& e) {
    throw TrainingDiverged(state.step, e.what());
  }
}

struct ExperimentResult {
  std::vector<MetricsRecord> records;
  CollapseVerdict verdict;
  std::optional<double> final_knn;
  std::optional<double> final_probe;
  bool aborted = false;
  long total_steps = 0;
  CollapseThresholds thresholds;
  int num_classes = 0;
  json final_checkpoint;  // full model snapshot (checkpoint container)
};

using MetricsSink = std::function<void(const MetricsRecord&)>;

namespace detail {

// Eval-mode features of raw (un-augmented) samples, in list order.
template <typename Scalar>
Tensor<double> monitor_features(SimSiamModel<Scalar>& model,
                                const std::vector<Sample<Scalar>>& samples, long cap,
                                KnnFeatures source) {
  const long n = std::min<long>(cap, static_cast<long>(samples.size()));
  const long chunk = 256;
  Tensor<double> out;
  std::vector<const Sample<Scalar>*> ptrs;
  long written = 0;
  for (long lo = 0; lo < n; lo += chunk) {
    const long hi = std::min(n, lo + chunk);
    ptrs.clear();
    for (long i = lo; i < hi; ++i) ptrs.push_back(&samples[static_cast<std::size_t>(i)]);
    // Identity batch assembly (no augmentation).
    Shape shape;
    shape.push_back(static_cast<Index>(ptrs.size()));
    for (Index d : ptrs.front()->payload.shape()) shape.push_back(d);
    Tensor<Scalar> batch(shape);
    const Index per = ptrs.front()->payload.numel();
    for (std::size_t i = 0; i < ptrs.size(); ++i)
      batch.flat().segment(static_cast<Index>(i) * per, per) = ptrs[i]->payload.flat();

    Tape<Scalar> tape;
    Var<Scalar> f = source == KnnFeatures::backbone
                        ? model.encoder.backbone_forward(tape, tape.constant(batch), Mode::eval)
                        : model.encoder.forward(tape, tape.constant(batch), Mode::eval);
    if (out.numel() == 0) out = Tensor<double>({n, f.value().cols()});
    out.mat().middleRows(written, hi - lo) = f.value().mat().template cast<double>();
    written += hi - lo;
  }
  return out;
}

template <typename Scalar>
std::optional<double> knn_probe_point(SimSiamModel<Scalar>& model, const Dataset<Scalar>& data,
                                      const DiagnosticsConfig& diag) {
  if (data.val.empty() || data.num_classes < 2) return std::nullopt;
  const long cap = std::min<long>(diag.knn_train_cap, static_cast<long>(data.train.size()));
  Tensor<double> train_f = monitor_features(model, data.train, cap, diag.knn_features);
  Tensor<double> val_f = monitor_features(model, data.val,
                                          static_cast<long>(data.val.size()), diag.knn_features);
  const std::vector<int> all_labels = labels_of(data.train);
  std::vector<int> train_labels(all_labels.begin(), all_labels.begin() + cap);
  const int k = std::min<int>(diag.knn_k, static_cast<int>(cap));
  return knn_monitor(train_f, train_labels, val_f, labels_of(data.val), k,
                     diag.knn_temperature);
}

template <typename Scalar>
Dataset<Scalar> build_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset.kind == DatasetKind::synthetic) {
    const auto& s = cfg.dataset.synthetic;
    return make_synthetic<Scalar>(s.num_classes, s.dim, s.samples_per_class, s.separation,
                                  cfg.seed, s.val_per_class);
  }
  const auto& c = cfg.dataset.cifar10;
  return load_cifar10<Scalar>(c.resolved_root(), c.subset, c.val_subset);
}

template <typename Scalar>
ExperimentResult run_experiment_impl(const ExperimentConfig& cfg, const MetricsSink& sink) {
  cfg.validate();
  Dataset<Scalar> data = build_dataset<Scalar>(cfg);
  SimSiamModel<Scalar> model(cfg.encoder_spec(), cfg.predictor.mode, cfg.predictor.hidden,
                             cfg.predictor.bn_hidden, cfg.predictor.bn_output);
  init_params(model, cfg.seed, cfg.init);

  BatchSchedule schedule(static_cast<long>(data.train.size()), cfg.optimizer.batch_size,
                         cfg.optimizer.epochs, cfg.seed);
  const long total = schedule.total_steps();
  if (total < 1) throw std::invalid_argument("optimizer: schedule yields zero steps");
  const LossConfig loss_cfg = cfg.resolved_loss();
  SgdState<Scalar> state;

  ExperimentResult result;
  result.total_steps = total;
  result.thresholds = cfg.resolved_collapse();
  result.num_classes = data.num_classes;

  auto emit = [&](MetricsRecord r) {
    result.records.push_back(r);
    if (sink) sink(r);
  };
  auto views_for = [&](const std::vector<Index>& idx, long epoch, int view) {
    std::vector<const Sample<Scalar>*> ptrs;
    ptrs.reserve(idx.size());
    for (Index i : idx) ptrs.push_back(&data.train[static_cast<std::size_t>(i)]);
    return make_view_batch(ptrs, cfg.augment, cfg.seed, epoch, view);
  };
  auto ids_for = [&](const std::vector<Index>& idx) {
    std::vector<long> ids;
    ids.reserve(idx.size());
    for (Index i : idx) ids.push_back(data.train[static_cast<std::size_t>(i)].id);
    return ids;
  };

  const bool alternating = cfg.trainer_mode == TrainerMode::alternating;
  std::optional<EtaBank<Scalar>> bank;
  if (alternating) {
    bank.emplace(static_cast<long>(data.train.size()), cfg.encoder.output_dim);
    if (cfg.alternation.eta_init == EtaInit::network) {
      // First assignment from the freshly initialized network (eval mode:
      // id-ordered chunks, batch-size independent).
      const long chunk = 256;
      const long n = static_cast<long>(data.train.size());
      for (long lo = 0; lo < n; lo += chunk) {
        const long hi = std::min(n, lo + chunk);
        Shape shape;
        shape.push_back(static_cast<Index>(hi - lo));
        for (Index d : data.train.front().payload.shape()) shape.push_back(d);
        Tensor<Scalar> batch(shape);
        const Index per = data.train.front().payload.numel();
        for (long i = lo; i < hi; ++i)
          batch.flat().segment(static_cast<Index>(i - lo) * per, per) =
              data.train[static_cast<std::size_t>(i)].payload.flat();
        Tape<Scalar> tape;
        Var<Scalar> z = model.encoder.forward(tape, tape.constant(batch), Mode::eval);
        Tensor<Scalar> reps = z.value();
        if (cfg.alternation.normalize_eta) normalize_rows(reps);
        for (long i = lo; i < hi; ++i)
          bank->assign(data.train[static_cast<std::size_t>(i)].id,
                       reps.mat().row(static_cast<Index>(i - lo)));
      }
    }
  }

  const auto t_start = std::chrono::steady_clock::now();
  auto wallclock_ms = [&]() {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start)
        .count();
  };
  auto record_for = [&](long step, const StepOutcome& o) {
    MetricsRecord r;
    r.step = step;
    r.epoch = schedule.epoch_of(step);
    r.lr = lr_at(step, cfg.optimizer, total);
    r.loss = o.loss;
    r.output_std = o.output_std;
    r.wallclock_ms = wallclock_ms();
    const bool last = step == total - 1;
    if (step % cfg.diagnostics.eval_interval == 0 || last)
      r.knn_acc = knn_probe_point(model, data, cfg.diagnostics);
    if (step % cfg.diagnostics.log_interval == 0 || last) emit(r);
    if (r.knn_acc) result.final_knn = r.knn_acc;
  };

  try {
    if (!alternating) {
      for (long step = 0; step < total; ++step) {
        const long epoch = schedule.epoch_of(step);
        const std::vector<Index> idx = schedule.batch_at(step);
        TwoViewBatch<Scalar> batch;
        batch.view1 = views_for(idx, epoch, 1);
        batch.view2 = views_for(idx, epoch, 2);
        if (loss_cfg.symmetry == Symmetry::asymmetric_2x) {
          batch.view3 = views_for(idx, epoch, 3);
          batch.view4 = views_for(idx, epoch, 4);
        }
        StepOutcome o = train_step(model, batch, loss_cfg, cfg.optimizer, state, total);
        record_for(step, o);
      }
    } else {
      long step = 0;
      while (step < total) {
        const long k = std::min<long>(cfg.alternation.inner_steps, total - step);
        // Cache eta for the next k batches at the current parameters.
        for (long j = 0; j < k; ++j) {
          const long s = step + j;
          const std::vector<Index> idx = schedule.batch_at(s);
          Tensor<Scalar> view2 = views_for(idx, schedule.epoch_of(s), 2);
          Tape<Scalar> tape;
          Var<Scalar> z = model.encoder.forward(tape, tape.constant(view2), Mode::train);
          Tensor<Scalar> reps = z.value();
          if (cfg.alternation.normalize_eta) normalize_rows(reps);
          const std::vector<long> ids = ids_for(idx);
          for (std::size_t i = 0; i < ids.size(); ++i)
            bank->update(ids[i], reps.mat().row(static_cast<Index>(i)),
                         cfg.alternation.eta_update, cfg.alternation.eta_momentum);
        }
        // k SGD steps on theta with the cached targets.
        for (long j = 0; j < k; ++j) {
          const long s = step + j;
          const std::vector<Index> idx = schedule.batch_at(s);
          Tensor<Scalar> view1 = views_for(idx, schedule.epoch_of(s), 1);
          const double lr = lr_at(s, cfg.optimizer, total);
          SubstepOutcome<Scalar> o = theta_substep(model.encoder, view1, ids_for(idx), *bank,
                                                   cfg.alternation, cfg.optimizer, state, lr);
          StepOutcome so;
          so.loss = o.loss;
          so.output_std = o.output_std;
          record_for(s, so);
        }
        step += k;
      }
    }
  } catch (const NonFiniteError& e) {
    // Non-finite outside train_step (eta pass / substep forward).
    MetricsRecord r;
    r.step = state.step;
    r.epoch = schedule.epoch_of(std::min(state.step, total - 1));
    r.loss = std::numeric_limits<double>::quiet_NaN();
    r.wallclock_ms = wallclock_ms();
    emit(r);
    result.aborted = true;
  } catch (const TrainingDiverged& e) {
    MetricsRecord r;
    r.step = e.step;
    r.epoch = schedule.epoch_of(std::min(e.step, total - 1));
    r.loss = std::numeric_limits<double>::quiet_NaN();
    r.wallclock_ms = wallclock_ms();
    emit(r);
    result.aborted = true;
  }

  CollapseThresholds th = result.thresholds;
  th.window = std::max<long>(1, std::min<long>(th.window, static_cast<long>(result.records.size())));
  result.verdict = result.records.empty() ? CollapseVerdict{} : collapse_verdict(result.records, th);

  if (cfg.diagnostics.final_probe && data.num_classes >= 2 && !result.records.empty()) {
    const long cap = std::min<long>(cfg.diagnostics.knn_train_cap,
                                    static_cast<long>(data.train.size()));
    Tensor<double> feats =
        monitor_features(model, data.train, cap, cfg.diagnostics.knn_features);
    const std::vector<int> all_labels = labels_of(data.train);
    std::vector<int> labels(all_labels.begin(), all_labels.begin() + cap);
    ProbeConfig pc = cfg.diagnostics.probe;
    pc.seed = cfg.seed;
    result.final_probe = linear_probe(feats, labels, pc);
  }
  result.final_checkpoint = checkpoint_to_json(model);
  return result;
}

}  // namespace detail

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const MetricsSink& sink = {}) {
  return cfg.precision == Precision::f64 ? detail::run_experiment_impl<double>(cfg, sink)
                                         : detail::run_experiment_impl<float>(cfg, sink);
}

inline ExperimentResult run_experiment(const std::string& preset, const MetricsSink& sink = {}) {
  return run_experiment(preset_config(preset), sink);
}

// The alternating-optimization entry point; requires an alternating config.
inline ExperimentResult alternating_train(const ExperimentConfig& cfg,
                                          const MetricsSink& sink = {}) {
  if (cfg.trainer_mode != TrainerMode::alternating)
    throw std::invalid_argument("alternating_train: trainer.mode must be 'alternating'");
  return run_experiment(cfg, sink);
}

}  // namespace simsiam

#endif  // SIMSIAM_TRAINER_HPP
