#ifndef SIMSIAM_CONFIG_HPP
#define SIMSIAM_CONFIG_HPP

#include <cstdlib>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "simsiam/augment.hpp"
#include "simsiam/checkpoint.hpp"
#include "simsiam/diagnostics.hpp"
#include "simsiam/losses.hpp"
#include "simsiam/optimizer.hpp"

namespace simsiam {

inline constexpr const char* kDataRootEnv = "SIMSIAM_DATA_ROOT";

enum class Precision { f32, f64 };
enum class DatasetKind { synthetic, cifar10 };
enum class KnnFeatures { backbone, projection };
enum class TrainerMode { simsiam, alternating };
enum class EtaUpdateMode { direct_assign, moving_average };
enum class AlternationLoss { cosine, mse };
enum class EtaInit { network, zero };

struct SyntheticConfig {
  int num_classes = 10;
  Index dim = 32;
  int samples_per_class = 128;
  int val_per_class = 32;
  double separation = 10.0;
  friend bool operator==(const SyntheticConfig&, const SyntheticConfig&) = default;
};

struct CifarConfig {
  std::string root;  // empty: resolve from $SIMSIAM_DATA_ROOT
  long subset = 5000;
  long val_subset = 1000;
  friend bool operator==(const CifarConfig&, const CifarConfig&) = default;

  std::string resolved_root() const {
    if (!root.empty()) return root;
    if (const char* env = std::getenv(kDataRootEnv)) return env;
    throw std::invalid_argument(std::string("dataset.cifar10.root not set and $") + kDataRootEnv +
                                " is unset");
  }
};

struct DatasetConfig {
  DatasetKind kind = DatasetKind::synthetic;
  SyntheticConfig synthetic;
  CifarConfig cifar10;
  friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

struct EncoderConfig {
  BackboneKind backbone = BackboneKind::mlp;
  std::vector<Index> backbone_widths{128, 128};
  std::vector<Index> projection_hidden{128, 128};
  Index output_dim = 64;
  bool proj_bn_hidden = true;
  bool proj_bn_output = true;
  bool proj_bn_output_affine = true;
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

struct PredictorConfig {
  PredictorMode mode = PredictorMode::learned;
  Index hidden = 0;  // 0: bottleneck default output_dim / 4
  bool bn_hidden = true;
  bool bn_output = false;
  friend bool operator==(const PredictorConfig&, const PredictorConfig&) = default;
};

struct AlternationConfig {
  long inner_steps = 1;  // k; one alternation caches eta for k SGD steps
  AlternationLoss loss = AlternationLoss::cosine;
  EtaUpdateMode eta_update = EtaUpdateMode::direct_assign;
  double eta_momentum = 0.8;
  bool normalize_eta = true;  // normalize representations before storing in the bank
  EtaInit eta_init = EtaInit::network;
  friend bool operator==(const AlternationConfig&, const AlternationConfig&) = default;
};

struct DiagnosticsConfig {
  long eval_interval = 100;  // kNN monitor cadence, in steps
  int knn_k = 20;
  double knn_temperature = 0.07;
  KnnFeatures knn_features = KnnFeatures::backbone;
  long knn_train_cap = 2000;
  bool final_probe = true;
  ProbeConfig probe;
  CollapseThresholds collapse;
  bool collapse_std_auto = true;  // resolve std_threshold = 0.1/sqrt(output_dim)
  long log_interval = 1;
  friend bool operator==(const DiagnosticsConfig&, const DiagnosticsConfig&) = default;
};

struct ExperimentConfig {
  Precision precision = Precision::f64;
  std::uint64_t seed = 1;
  DatasetConfig dataset;
  EncoderConfig encoder;
  PredictorConfig predictor;
  InitConfig init;
  LossConfig loss;
  OptimizerConfig optimizer;
  AugmentationConfig augment;
  DiagnosticsConfig diagnostics;
  TrainerMode trainer_mode = TrainerMode::simsiam;
  AlternationConfig alternation;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;

  // Cross-field consistency; throws with a field-level message.
  void validate() const {
    augment.validate();
    if (optimizer.batch_size < 2)
      throw std::invalid_argument("optimizer.batch_size: must be >= 2 (train-mode batchnorm)");
    if (optimizer.epochs < 1) throw std::invalid_argument("optimizer.epochs: must be >= 1");
    if (optimizer.base_lr <= 0) throw std::invalid_argument("optimizer.base_lr: must be > 0");
    if (encoder.output_dim < 1) throw std::invalid_argument("encoder.output_dim: must be >= 1");
    if (encoder.backbone_widths.empty())
      throw std::invalid_argument("encoder.backbone_widths: must not be empty");
    if (predictor.hidden < 0) throw std::invalid_argument("predictor.hidden: must be >= 0");
    if (alternation.inner_steps < 1)
      throw std::invalid_argument("trainer.alternation.inner_steps: must be >= 1");
    if (alternation.eta_momentum < 0 || alternation.eta_momentum > 1)
      throw std::invalid_argument("trainer.alternation.eta_momentum: must lie in [0, 1]");
    if (diagnostics.log_interval < 1)
      throw std::invalid_argument("diagnostics.log_interval: must be >= 1");
    if (diagnostics.eval_interval < 1)
      throw std::invalid_argument("diagnostics.eval_interval: must be >= 1");
    if (dataset.kind == DatasetKind::synthetic) {
      if (dataset.synthetic.separation < 0)
        throw std::invalid_argument("dataset.synthetic.separation: must be >= 0");
      if (dataset.synthetic.num_classes < 1 || dataset.synthetic.samples_per_class < 1)
        throw std::invalid_argument("dataset.synthetic: counts must be >= 1");
    }
    if (trainer_mode == TrainerMode::alternating &&
        predictor.mode != PredictorMode::identity)
      throw std::invalid_argument(
          "trainer.mode=alternating has no prediction head; set predictor.mode=identity");
  }

  // Resolved loss config (single source of truth for the predictor mode).
  LossConfig resolved_loss() const {
    LossConfig l = loss;
    l.predictor_mode = predictor.mode;
    return l;
  }

  CollapseThresholds resolved_collapse() const {
    CollapseThresholds t = diagnostics.collapse;
    if (diagnostics.collapse_std_auto)
      t.std_threshold = 0.1 / std::sqrt(static_cast<double>(encoder.output_dim));
    return t;
  }

  EncoderSpec encoder_spec() const {
    EncoderSpec s;
    s.backbone = encoder.backbone;
    s.backbone_widths = encoder.backbone_widths;
    s.output_dim = encoder.output_dim;
    if (encoder.backbone == BackboneKind::mlp) {
      s.input_dim = dataset.kind == DatasetKind::synthetic ? dataset.synthetic.dim : 3 * 32 * 32;
    } else {
      s.input_shape = {3, 32, 32};
    }
    MlpSpec proj;
    proj.layer_dims.push_back(encoder.backbone_widths.back());
    for (Index h : encoder.projection_hidden) proj.layer_dims.push_back(h);
    proj.layer_dims.push_back(encoder.output_dim);
    proj.bn_hidden = encoder.proj_bn_hidden;
    proj.bn_output = encoder.proj_bn_output;
    proj.bn_output_affine = encoder.proj_bn_output_affine;
    s.projection = proj;
    return s;
  }
};

// ---------------------------------------------------------------------------
// Enum <-> string
// ---------------------------------------------------------------------------

namespace detail {

template <typename E>
struct EnumNames;

#define SIMSIAM_ENUM_NAMES(E, ...)                                       \
  template <>                                                            \
  struct EnumNames<E> {                                                  \
    static const std::vector<std::pair<E, const char*>>& table() {       \
      static const std::vector<std::pair<E, const char*>> t{__VA_ARGS__}; \
      return t;                                                          \
    }                                                                    \
  }

SIMSIAM_ENUM_NAMES(Precision, {Precision::f32, "f32"}, {Precision::f64, "f64"});
SIMSIAM_ENUM_NAMES(DatasetKind, {DatasetKind::synthetic, "synthetic"},
                   {DatasetKind::cifar10, "cifar10"});
SIMSIAM_ENUM_NAMES(BackboneKind, {BackboneKind::mlp, "mlp"},
                   {BackboneKind::small_conv, "small_conv"});
SIMSIAM_ENUM_NAMES(PredictorMode, {PredictorMode::learned, "learned"},
                   {PredictorMode::identity, "identity"},
                   {PredictorMode::frozen_random, "frozen_random"});
SIMSIAM_ENUM_NAMES(Similarity, {Similarity::cosine, "cosine"},
                   {Similarity::cross_entropy, "cross_entropy"});
SIMSIAM_ENUM_NAMES(Symmetry, {Symmetry::symmetric, "symmetric"},
                   {Symmetry::asymmetric, "asymmetric"},
                   {Symmetry::asymmetric_2x, "asymmetric_2x"});
SIMSIAM_ENUM_NAMES(PredictorLrPolicy, {PredictorLrPolicy::cosine, "cosine"},
                   {PredictorLrPolicy::constant, "constant"});
SIMSIAM_ENUM_NAMES(KnnFeatures, {KnnFeatures::backbone, "backbone"},
                   {KnnFeatures::projection, "projection"});
SIMSIAM_ENUM_NAMES(TrainerMode, {TrainerMode::simsiam, "simsiam"},
                   {TrainerMode::alternating, "alternating"});
SIMSIAM_ENUM_NAMES(EtaUpdateMode, {EtaUpdateMode::direct_assign, "direct_assign"},
                   {EtaUpdateMode::moving_average, "moving_average"});
SIMSIAM_ENUM_NAMES(AlternationLoss, {AlternationLoss::cosine, "cosine"},
                   {AlternationLoss::mse, "mse"});
SIMSIAM_ENUM_NAMES(EtaInit, {EtaInit::network, "network"}, {EtaInit::zero, "zero"});
SIMSIAM_ENUM_NAMES(InitConfig::Scheme, {InitConfig::Scheme::uniform_fan_in, "uniform_fan_in"},
                   {InitConfig::Scheme::fixed_std, "fixed_std"});

#undef SIMSIAM_ENUM_NAMES

template <typename E>
const char* enum_name(E v) {
  for (auto& [e, n] : EnumNames<E>::table())
    if (e == v) return n;
  throw std::logic_error("enum_name: unmapped value");
}

template <typename E>
E enum_value(const std::string& s, const std::string& path) {
  for (auto& [e, n] : EnumNames<E>::table())
    if (s == n) return e;
  std::string options;
  for (auto& [e, n] : EnumNames<E>::table()) {
    if (!options.empty()) options += ", ";
    options += n;
  }
  throw std::invalid_argument(path + ": unknown value '" + s + "' (expected one of: " + options +
                              ")");
}

// Strict object walker: every present key must be consumed by a field reader.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw std::invalid_argument(path_ + ": expected an object");
  }

  ~Fields() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        throw std::invalid_argument("unknown key: " + path_ + it.key());
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw std::invalid_argument(path_ + key + ": " + e.what());
    }
  }

  template <typename E>
  void read_enum(const char* key, E& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if (!j_.at(key).is_string())
      throw std::invalid_argument(path_ + key + ": expected a string");
    out = enum_value<E>(j_.at(key).get<std::string>(), path_ + key);
  }

  const json* object(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key)) return nullptr;
    return &j_.at(key);
  }

  const std::string& path() const { return path_; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// JSON <-> ExperimentConfig
// ---------------------------------------------------------------------------

inline json to_json(const ExperimentConfig& c) {
  using detail::enum_name;
  json j;
  j["precision"] = enum_name(c.precision);
  j["seed"] = c.seed;
  j["dataset"] = {{"kind", enum_name(c.dataset.kind)},
                  {"synthetic",
                   {{"num_classes", c.dataset.synthetic.num_classes},
                    {"dim", c.dataset.synthetic.dim},
                    {"samples_per_class", c.dataset.synthetic.samples_per_class},
                    {"val_per_class", c.dataset.synthetic.val_per_class},
                    {"separation", c.dataset.synthetic.separation}}},
                  {"cifar10",
                   {{"root", c.dataset.cifar10.root},
                    {"subset", c.dataset.cifar10.subset},
                    {"val_subset", c.dataset.cifar10.val_subset}}}};
  j["encoder"] = {{"backbone", enum_name(c.encoder.backbone)},
                  {"backbone_widths", c.encoder.backbone_widths},
                  {"projection_hidden", c.encoder.projection_hidden},
                  {"output_dim", c.encoder.output_dim},
                  {"bn_hidden", c.encoder.proj_bn_hidden},
                  {"bn_output", c.encoder.proj_bn_output},
                  {"bn_output_affine", c.encoder.proj_bn_output_affine}};
  j["predictor"] = {{"mode", enum_name(c.predictor.mode)},
                    {"hidden", c.predictor.hidden},
                    {"bn_hidden", c.predictor.bn_hidden},
                    {"bn_output", c.predictor.bn_output}};
  j["init"] = {{"scheme", enum_name(c.init.scheme)}, {"fixed_std", c.init.fixed_std}};
  j["loss"] = {{"similarity", enum_name(c.loss.similarity)},
               {"symmetry", enum_name(c.loss.symmetry)},
               {"stop_grad", c.loss.stop_grad}};
  j["optimizer"] = {{"base_lr", c.optimizer.base_lr},
                    {"batch_size", c.optimizer.batch_size},
                    {"momentum", c.optimizer.momentum},
                    {"weight_decay", c.optimizer.weight_decay},
                    {"epochs", c.optimizer.epochs},
                    {"warmup_epochs", c.optimizer.warmup_epochs},
                    {"predictor_lr_policy", enum_name(c.optimizer.predictor_lr_policy)}};
  j["augment"] = {{"crop_enabled", c.augment.crop_enabled},
                  {"crop_scale", {c.augment.crop_scale_lo, c.augment.crop_scale_hi}},
                  {"hflip_enabled", c.augment.hflip_enabled},
                  {"hflip_prob", c.augment.hflip_prob},
                  {"jitter_enabled", c.augment.jitter_enabled},
                  {"jitter_prob", c.augment.jitter_prob},
                  {"jitter_strengths",
                   {c.augment.jitter_brightness, c.augment.jitter_contrast,
                    c.augment.jitter_saturation, c.augment.jitter_hue}},
                  {"grayscale_enabled", c.augment.grayscale_enabled},
                  {"grayscale_prob", c.augment.grayscale_prob},
                  {"noise_enabled", c.augment.noise_enabled},
                  {"noise_std", c.augment.noise_std},
                  {"dropout_enabled", c.augment.dropout_enabled},
                  {"dropout_prob", c.augment.dropout_prob}};
  j["diagnostics"] = {{"eval_interval", c.diagnostics.eval_interval},
                      {"knn_k", c.diagnostics.knn_k},
                      {"knn_temperature", c.diagnostics.knn_temperature},
                      {"knn_features", enum_name(c.diagnostics.knn_features)},
                      {"knn_train_cap", c.diagnostics.knn_train_cap},
                      {"final_probe", c.diagnostics.final_probe},
                      {"probe",
                       {{"lr", c.diagnostics.probe.lr},
                        {"momentum", c.diagnostics.probe.momentum},
                        {"weight_decay", c.diagnostics.probe.weight_decay},
                        {"epochs", c.diagnostics.probe.epochs},
                        {"batch_size", c.diagnostics.probe.batch_size},
                        {"holdout_fraction", c.diagnostics.probe.holdout_fraction}}},
                      {"collapse",
                       {{"window", c.diagnostics.collapse.window},
                        {"loss_floor", c.diagnostics.collapse.loss_floor},
                        {"std_auto", c.diagnostics.collapse_std_auto},
                        {"std_threshold", c.diagnostics.collapse.std_threshold},
                        {"osc_threshold", c.diagnostics.collapse.osc_threshold},
                        {"rise_margin", c.diagnostics.collapse.rise_margin}}},
                      {"log_interval", c.diagnostics.log_interval}};
  j["trainer"] = {{"mode", enum_name(c.trainer_mode)},
                  {"alternation",
                   {{"inner_steps", c.alternation.inner_steps},
                    {"loss", enum_name(c.alternation.loss)},
                    {"eta_update", enum_name(c.alternation.eta_update)},
                    {"eta_momentum", c.alternation.eta_momentum},
                    {"normalize_eta", c.alternation.normalize_eta},
                    {"eta_init", enum_name(c.alternation.eta_init)}}}};
  return j;
}

ExperimentConfig preset_config(const std::string& name);  // defined below

// Applies a parsed JSON document on top of `base`. Unknown keys anywhere are
// hard errors naming the key; invariant violations carry field-level paths.
inline ExperimentConfig config_from_json(const json& j, ExperimentConfig base = {}) {
  using detail::Fields;
  ExperimentConfig c = std::move(base);
  {
    Fields top(j, "");
    if (top.has("preset")) {
      c = preset_config(j.at("preset").get<std::string>());
    }
    top.read_enum("precision", c.precision);
    top.read("seed", c.seed);
    if (const json* d = top.object("dataset")) {
      Fields f(*d, "dataset.");
      f.read_enum("kind", c.dataset.kind);
      if (const json* s = f.object("synthetic")) {
        Fields fs(*s, "dataset.synthetic.");
        fs.read("num_classes", c.dataset.synthetic.num_classes);
        fs.read("dim", c.dataset.synthetic.dim);
        fs.read("samples_per_class", c.dataset.synthetic.samples_per_class);
        fs.read("val_per_class", c.dataset.synthetic.val_per_class);
        fs.read("separation", c.dataset.synthetic.separation);
      }
      if (const json* s = f.object("cifar10")) {
        Fields fc(*s, "dataset.cifar10.");
        fc.read("root", c.dataset.cifar10.root);
        fc.read("subset", c.dataset.cifar10.subset);
        fc.read("val_subset", c.dataset.cifar10.val_subset);
      }
    }
    if (const json* e = top.object("encoder")) {
      Fields f(*e, "encoder.");
      f.read_enum("backbone", c.encoder.backbone);
      f.read("backbone_widths", c.encoder.backbone_widths);
      f.read("projection_hidden", c.encoder.projection_hidden);
      f.read("output_dim", c.encoder.output_dim);
      f.read("bn_hidden", c.encoder.proj_bn_hidden);
      f.read("bn_output", c.encoder.proj_bn_output);
      f.read("bn_output_affine", c.encoder.proj_bn_output_affine);
    }
    if (const json* p = top.object("predictor")) {
      Fields f(*p, "predictor.");
      f.read_enum("mode", c.predictor.mode);
      f.read("hidden", c.predictor.hidden);
      f.read("bn_hidden", c.predictor.bn_hidden);
      f.read("bn_output", c.predictor.bn_output);
    }
    if (const json* i = top.object("init")) {
      Fields f(*i, "init.");
      f.read_enum("scheme", c.init.scheme);
      f.read("fixed_std", c.init.fixed_std);
    }
    if (const json* l = top.object("loss")) {
      Fields f(*l, "loss.");
      f.read_enum("similarity", c.loss.similarity);
      f.read_enum("symmetry", c.loss.symmetry);
      f.read("stop_grad", c.loss.stop_grad);
    }
    if (const json* o = top.object("optimizer")) {
      Fields f(*o, "optimizer.");
      f.read("base_lr", c.optimizer.base_lr);
      f.read("batch_size", c.optimizer.batch_size);
      f.read("momentum", c.optimizer.momentum);
      f.read("weight_decay", c.optimizer.weight_decay);
      f.read("epochs", c.optimizer.epochs);
      f.read("warmup_epochs", c.optimizer.warmup_epochs);
      f.read_enum("predictor_lr_policy", c.optimizer.predictor_lr_policy);
    }
    if (const json* a = top.object("augment")) {
      Fields f(*a, "augment.");
      f.read("crop_enabled", c.augment.crop_enabled);
      if (f.has("crop_scale")) {
        const auto v = a->at("crop_scale").get<std::vector<double>>();
        if (v.size() != 2)
          throw std::invalid_argument("augment.crop_scale: expected [lo, hi]");
        c.augment.crop_scale_lo = v[0];
        c.augment.crop_scale_hi = v[1];
      }
      f.read("hflip_enabled", c.augment.hflip_enabled);
      f.read("hflip_prob", c.augment.hflip_prob);
      f.read("jitter_enabled", c.augment.jitter_enabled);
      f.read("jitter_prob", c.augment.jitter_prob);
      if (f.has("jitter_strengths")) {
        const auto v = a->at("jitter_strengths").get<std::vector<double>>();
        if (v.size() != 4)
          throw std::invalid_argument(
              "augment.jitter_strengths: expected [brightness, contrast, saturation, hue]");
        c.augment.jitter_brightness = v[0];
        c.augment.jitter_contrast = v[1];
        c.augment.jitter_saturation = v[2];
        c.augment.jitter_hue = v[3];
      }
      f.read("grayscale_enabled", c.augment.grayscale_enabled);
      f.read("grayscale_prob", c.augment.grayscale_prob);
      f.read("noise_enabled", c.augment.noise_enabled);
      f.read("noise_std", c.augment.noise_std);
      f.read("dropout_enabled", c.augment.dropout_enabled);
      f.read("dropout_prob", c.augment.dropout_prob);
    }
    if (const json* d = top.object("diagnostics")) {
      Fields f(*d, "diagnostics.");
      f.read("eval_interval", c.diagnostics.eval_interval);
      f.read("knn_k", c.diagnostics.knn_k);
      f.read("knn_temperature", c.diagnostics.knn_temperature);
      f.read_enum("knn_features", c.diagnostics.knn_features);
      f.read("knn_train_cap", c.diagnostics.knn_train_cap);
      f.read("final_probe", c.diagnostics.final_probe);
      if (const json* p = f.object("probe")) {
        Fields fp(*p, "diagnostics.probe.");
        fp.read("lr", c.diagnostics.probe.lr);
        fp.read("momentum", c.diagnostics.probe.momentum);
        fp.read("weight_decay", c.diagnostics.probe.weight_decay);
        fp.read("epochs", c.diagnostics.probe.epochs);
        fp.read("batch_size", c.diagnostics.probe.batch_size);
        fp.read("holdout_fraction", c.diagnostics.probe.holdout_fraction);
      }
      if (const json* cl = f.object("collapse")) {
        Fields fc(*cl, "diagnostics.collapse.");
        fc.read("window", c.diagnostics.collapse.window);
        fc.read("loss_floor", c.diagnostics.collapse.loss_floor);
        // An explicit threshold without std_auto pins the value; std_auto,
        // when present, always wins.
        const bool auto_given = fc.has("std_auto");
        if (fc.has("std_threshold")) {
          c.diagnostics.collapse.std_threshold = cl->at("std_threshold").get<double>();
          if (!auto_given) c.diagnostics.collapse_std_auto = false;
        }
        if (auto_given) c.diagnostics.collapse_std_auto = cl->at("std_auto").get<bool>();
        fc.read("osc_threshold", c.diagnostics.collapse.osc_threshold);
        fc.read("rise_margin", c.diagnostics.collapse.rise_margin);
      }
      f.read("log_interval", c.diagnostics.log_interval);
    }
    if (const json* t = top.object("trainer")) {
      Fields f(*t, "trainer.");
      f.read_enum("mode", c.trainer_mode);
      if (const json* alt = f.object("alternation")) {
        Fields fa(*alt, "trainer.alternation.");
        fa.read("inner_steps", c.alternation.inner_steps);
        fa.read_enum("loss", c.alternation.loss);
        fa.read_enum("eta_update", c.alternation.eta_update);
        fa.read("eta_momentum", c.alternation.eta_momentum);
        fa.read("normalize_eta", c.alternation.normalize_eta);
        fa.read_enum("eta_init", c.alternation.eta_init);
      }
    }
  }
  c.validate();
  return c;
}

// Parses a declarative config document (JSON; empty document = baseline
// defaults, optional "preset" key selects a named starting point).
inline ExperimentConfig parse_config(const std::string& text) {
  json j;
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    j = json::object();
  } else {
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw std::invalid_argument(std::string("config: not valid JSON: ") + e.what());
    }
  }
  return config_from_json(j);
}

}  // namespace simsiam

#include "simsiam/presets.hpp"

#endif  // SIMSIAM_CONFIG_HPP
