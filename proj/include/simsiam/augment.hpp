#ifndef SIMSIAM_AUGMENT_HPP
#define SIMSIAM_AUGMENT_HPP

#include <algorithm>
#include <cmath>

#include "simsiam/dataset.hpp"
#include "simsiam/rng.hpp"

namespace simsiam {

// Image recipe: random resized crop (scale in [0.2, 1.0], aspect in
// [3/4, 4/3], bilinear), horizontal flip p=0.5, color jitter p=0.8 with
// strengths {0.4, 0.4, 0.4, 0.1}, grayscale p=0.2. No blur. Vector data uses
// additive Gaussian noise plus coordinate dropout instead. Exact draw order
// and factor conventions are pinned in docs/formats.md.
struct AugmentationConfig {
  // image transforms
  bool crop_enabled = true;
  double crop_scale_lo = 0.2;
  double crop_scale_hi = 1.0;
  bool hflip_enabled = true;
  double hflip_prob = 0.5;
  bool jitter_enabled = true;
  double jitter_prob = 0.8;
  double jitter_brightness = 0.4;
  double jitter_contrast = 0.4;
  double jitter_saturation = 0.4;
  double jitter_hue = 0.1;
  bool grayscale_enabled = true;
  double grayscale_prob = 0.2;
  // vector transforms
  bool noise_enabled = true;
  double noise_std = 0.5;
  bool dropout_enabled = true;
  double dropout_prob = 0.2;

  void validate() const {
    if (!(crop_scale_lo > 0.0) || crop_scale_lo > crop_scale_hi || crop_scale_hi > 1.0)
      throw std::invalid_argument("augment.crop_scale_range: need 0 < lo <= hi <= 1");
    for (double p : {hflip_prob, jitter_prob, grayscale_prob, dropout_prob})
      if (p < 0.0 || p > 1.0)
        throw std::invalid_argument("augment: probabilities must lie in [0, 1]");
    for (double s : {jitter_brightness, jitter_contrast, jitter_saturation, jitter_hue})
      if (s < 0.0) throw std::invalid_argument("augment: jitter strengths must be >= 0");
    if (jitter_hue > 0.5)
      throw std::invalid_argument("augment.jitter_hue: hue shift beyond half the circle");
    if (noise_std < 0.0) throw std::invalid_argument("augment.noise_std must be >= 0");
  }

  friend bool operator==(const AugmentationConfig&, const AugmentationConfig&) = default;
};

// Stream for (sample, epoch, view); identical paths reproduce identical
// views, distinct views of one sample in one step use distinct paths.
inline SplitRng augment_rng(std::uint64_t seed, long sample_id, long epoch, int view) {
  return SplitRng(seed, {rng_path::augment, static_cast<std::uint64_t>(sample_id),
                         static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(view)});
}

namespace detail {

inline constexpr double kAspectLo = 3.0 / 4.0;
inline constexpr double kAspectHi = 4.0 / 3.0;

template <typename Scalar>
Scalar sample_bilinear(const Tensor<Scalar>& img, Index c, double y, double x, Index ch_h,
                       Index ch_w) {
  y = std::clamp(y, 0.0, static_cast<double>(ch_h - 1));
  x = std::clamp(x, 0.0, static_cast<double>(ch_w - 1));
  const Index y0 = static_cast<Index>(std::floor(y));
  const Index x0 = static_cast<Index>(std::floor(x));
  const Index y1 = std::min(y0 + 1, ch_h - 1);
  const Index x1 = std::min(x0 + 1, ch_w - 1);
  const double fy = y - static_cast<double>(y0);
  const double fx = x - static_cast<double>(x0);
  const Scalar* base = img.data() + c * ch_h * ch_w;
  const double v00 = base[y0 * ch_w + x0], v01 = base[y0 * ch_w + x1];
  const double v10 = base[y1 * ch_w + x0], v11 = base[y1 * ch_w + x1];
  return static_cast<Scalar>((v00 * (1 - fx) + v01 * fx) * (1 - fy) +
                             (v10 * (1 - fx) + v11 * fx) * fy);
}

// Crop (i, j, h, w) then bilinear resize to the original size; half-pixel
// source coordinates.
template <typename Scalar>
Tensor<Scalar> crop_resize(const Tensor<Scalar>& img, Index i, Index j, Index h, Index w) {
  const Index C = img.dim(0), H = img.dim(1), W = img.dim(2);
  Tensor<Scalar> out({C, H, W});
  const double sy = static_cast<double>(h) / static_cast<double>(H);
  const double sx = static_cast<double>(w) / static_cast<double>(W);
  for (Index c = 0; c < C; ++c)
    for (Index dy = 0; dy < H; ++dy)
      for (Index dx = 0; dx < W; ++dx) {
        const double yy = (static_cast<double>(dy) + 0.5) * sy - 0.5 + static_cast<double>(i);
        const double xx = (static_cast<double>(dx) + 0.5) * sx - 0.5 + static_cast<double>(j);
        out.data()[(c * H + dy) * W + dx] = sample_bilinear(img, c, yy, xx, H, W);
      }
  return out;
}

template <typename Scalar>
Tensor<Scalar> random_resized_crop(const Tensor<Scalar>& img, const AugmentationConfig& cfg,
                                   SplitRng& rng) {
  const Index H = img.dim(1), W = img.dim(2);
  const double area = static_cast<double>(H * W);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = area * rng.uniform(cfg.crop_scale_lo, cfg.crop_scale_hi);
    const double ratio = std::exp(rng.uniform(std::log(kAspectLo), std::log(kAspectHi)));
    const Index w = static_cast<Index>(std::lround(std::sqrt(target * ratio)));
    const Index h = static_cast<Index>(std::lround(std::sqrt(target / ratio)));
    if (w >= 1 && h >= 1 && w <= W && h <= H) {
      const Index i = static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(H - h + 1)));
      const Index j = static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(W - w + 1)));
      return crop_resize(img, i, j, h, w);
    }
  }
  // Degenerate draws: fall back to the largest centered crop with a clamped
  // aspect ratio.
  const double in_ratio = static_cast<double>(W) / static_cast<double>(H);
  Index w = W, h = H;
  if (in_ratio < kAspectLo)
    h = static_cast<Index>(std::lround(static_cast<double>(W) / kAspectLo));
  else if (in_ratio > kAspectHi)
    w = static_cast<Index>(std::lround(static_cast<double>(H) * kAspectHi));
  return crop_resize(img, (H - h) / 2, (W - w) / 2, h, w);
}

template <typename Scalar>
void hflip_inplace(Tensor<Scalar>& img) {
  const Index C = img.dim(0), H = img.dim(1), W = img.dim(2);
  for (Index c = 0; c < C; ++c)
    for (Index y = 0; y < H; ++y) {
      Scalar* row = img.data() + (c * H + y) * W;
      std::reverse(row, row + W);
    }
}

template <typename Scalar>
void clamp01_inplace(Tensor<Scalar>& img) {
  img.flat() = img.flat().max(Scalar(0)).min(Scalar(1));
}

inline double luma(double r, double g, double b) {
  return 0.299 * r + 0.587 * g + 0.114 * b;
}

template <typename Scalar>
void rgb_to_gray_inplace(Tensor<Scalar>& img) {
  const Index H = img.dim(1), W = img.dim(2);
  const Index hw = H * W;
  for (Index p = 0; p < hw; ++p) {
    const double y = luma(img.data()[p], img.data()[hw + p], img.data()[2 * hw + p]);
    img.data()[p] = img.data()[hw + p] = img.data()[2 * hw + p] = static_cast<Scalar>(y);
  }
}

inline void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  v = mx;
  s = mx > 0.0 ? d / mx : 0.0;
  if (d <= 0.0) {
    h = 0.0;
    return;
  }
  if (mx == r)
    h = std::fmod((g - b) / d, 6.0);
  else if (mx == g)
    h = (b - r) / d + 2.0;
  else
    h = (r - g) / d + 4.0;
  h /= 6.0;
  if (h < 0.0) h += 1.0;
}

inline void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  const double hh = std::fmod(h, 1.0) * 6.0;
  const int sector = static_cast<int>(std::floor(hh)) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (sector) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

// One jitter sub-transform; factor conventions: brightness/contrast/
// saturation factor uniform in [max(0, 1-s), 1+s], hue shift uniform in
// [-s, +s] turns of the hue circle. Output clamped to [0, 1].
template <typename Scalar>
void apply_jitter_component(Tensor<Scalar>& img, int which, const AugmentationConfig& cfg,
                            SplitRng& rng) {
  const Index hw = img.dim(1) * img.dim(2);
  Scalar* r = img.data();
  Scalar* g = img.data() + hw;
  Scalar* b = img.data() + 2 * hw;
  switch (which) {
    case 0: {  // brightness
      if (cfg.jitter_brightness <= 0) return;
      const double f =
          rng.uniform(std::max(0.0, 1.0 - cfg.jitter_brightness), 1.0 + cfg.jitter_brightness);
      img.flat() *= static_cast<Scalar>(f);
      break;
    }
    case 1: {  // contrast: blend with the mean gray level
      if (cfg.jitter_contrast <= 0) return;
      const double f =
          rng.uniform(std::max(0.0, 1.0 - cfg.jitter_contrast), 1.0 + cfg.jitter_contrast);
      double mean = 0.0;
      for (Index p = 0; p < hw; ++p) mean += luma(r[p], g[p], b[p]);
      mean /= static_cast<double>(hw);
      img.flat() = static_cast<Scalar>(f) * img.flat() + static_cast<Scalar>((1.0 - f) * mean);
      break;
    }
    case 2: {  // saturation: blend with the per-pixel gray
      if (cfg.jitter_saturation <= 0) return;
      const double f =
          rng.uniform(std::max(0.0, 1.0 - cfg.jitter_saturation), 1.0 + cfg.jitter_saturation);
      for (Index p = 0; p < hw; ++p) {
        const double y = luma(r[p], g[p], b[p]);
        r[p] = static_cast<Scalar>(f * r[p] + (1.0 - f) * y);
        g[p] = static_cast<Scalar>(f * g[p] + (1.0 - f) * y);
        b[p] = static_cast<Scalar>(f * b[p] + (1.0 - f) * y);
      }
      break;
    }
    default: {  // hue
      if (cfg.jitter_hue <= 0) return;
      const double shift = rng.uniform(-cfg.jitter_hue, cfg.jitter_hue);
      for (Index p = 0; p < hw; ++p) {
        double h, s, v, rr, gg, bb;
        rgb_to_hsv(r[p], g[p], b[p], h, s, v);
        h = std::fmod(h + shift + 1.0, 1.0);
        hsv_to_rgb(h, s, v, rr, gg, bb);
        r[p] = static_cast<Scalar>(rr);
        g[p] = static_cast<Scalar>(gg);
        b[p] = static_cast<Scalar>(bb);
      }
      break;
    }
  }
  clamp01_inplace(img);
}

template <typename Scalar>
Tensor<Scalar> augment_image(const Tensor<Scalar>& payload, const AugmentationConfig& cfg,
                             SplitRng& rng) {
  Tensor<Scalar> img = payload;
  if (cfg.crop_enabled) img = random_resized_crop(img, cfg, rng);
  if (cfg.hflip_enabled && rng.bernoulli(cfg.hflip_prob)) hflip_inplace(img);
  const bool color_ok = img.dim(0) == 3;
  if (cfg.jitter_enabled && color_ok && rng.bernoulli(cfg.jitter_prob)) {
    int order[4] = {0, 1, 2, 3};
    for (int i = 3; i > 0; --i)
      std::swap(order[i], order[rng.uniform_index(static_cast<std::uint64_t>(i + 1))]);
    for (int i = 0; i < 4; ++i) apply_jitter_component(img, order[i], cfg, rng);
  }
  if (cfg.grayscale_enabled && color_ok && rng.bernoulli(cfg.grayscale_prob))
    rgb_to_gray_inplace(img);
  return img;
}

template <typename Scalar>
Tensor<Scalar> augment_vector(const Tensor<Scalar>& payload, const AugmentationConfig& cfg,
                              SplitRng& rng) {
  Tensor<Scalar> v = payload;
  if (cfg.noise_enabled && cfg.noise_std > 0)
    for (Index i = 0; i < v.numel(); ++i)
      v.flat()[i] += static_cast<Scalar>(cfg.noise_std * rng.normal());
  if (cfg.dropout_enabled && cfg.dropout_prob > 0)
    for (Index i = 0; i < v.numel(); ++i)
      if (rng.bernoulli(cfg.dropout_prob)) v.flat()[i] = Scalar(0);
  return v;
}

}  // namespace detail

// One augmented view; pure in (sample, cfg, rng path).
template <typename Scalar>
Tensor<Scalar> augment(const Sample<Scalar>& sample, const AugmentationConfig& cfg, SplitRng rng) {
  if (sample.payload.rank() == 3) return detail::augment_image(sample.payload, cfg, rng);
  if (sample.payload.rank() == 1) return detail::augment_vector(sample.payload, cfg, rng);
  throw ShapeError("augment: payload must be rank-1 features or rank-3 image, got " +
                   shape_str(sample.payload.shape()));
}

// Batch tensor of one view of each listed sample.
template <typename Scalar>
Tensor<Scalar> make_view_batch(const std::vector<const Sample<Scalar>*>& samples,
                               const AugmentationConfig& cfg, std::uint64_t seed, long epoch,
                               int view) {
  if (samples.empty()) throw std::invalid_argument("make_view_batch: empty batch");
  std::vector<Tensor<Scalar>> views;
  views.reserve(samples.size());
  for (const auto* s : samples)
    views.push_back(augment(*s, cfg, augment_rng(seed, s->id, epoch, view)));
  Shape shape;
  shape.push_back(static_cast<Index>(views.size()));
  for (Index d : views.front().shape()) shape.push_back(d);
  Tensor<Scalar> out(shape);
  const Index per = views.front().numel();
  for (std::size_t i = 0; i < views.size(); ++i)
    out.flat().segment(static_cast<Index>(i) * per, per) = views[i].flat();
  return out;
}

}  // namespace simsiam

#endif  // SIMSIAM_AUGMENT_HPP
