#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "pmt/datagen.hpp"
#include "pmt/model.hpp"
#include "pmt/rng.hpp"
#include "pmt/tensor.hpp"

namespace pmt {

// ---------------------------------------------------------------------------
// Translation-invariant smoothing kernels

struct KernelSpec {
  enum class Kind { None, Linear, Gaussian } kind = Kind::None;
  std::size_t k = 1;  // half-width; realized matrix is (2k+1)x(2k+1)

  static KernelSpec none() { return {}; }
  static KernelSpec linear(std::size_t k) { return {Kind::Linear, k}; }
  static KernelSpec gaussian(std::size_t k) { return {Kind::Gaussian, k}; }
};

// Normalized, doubly symmetric smoothing matrix.
// Linear:   W[i][j] ~ (1-|i|/(k+1)) * (1-|j|/(k+1))
// Gaussian: W[i][j] ~ exp(-(i^2+j^2) / (2 sigma^2)), sigma = k/sqrt(3)
inline Tensor make_kernel(const KernelSpec& spec) {
  if (spec.kind == KernelSpec::Kind::None) return Tensor({1, 1}, {1.0});
  if (spec.k < 1) throw ValueError("kernel half-width must be >= 1");
  const std::size_t n = 2 * spec.k + 1;
  Tensor w({n, n});
  const double kd = static_cast<double>(spec.k);
  double sum = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const double i = static_cast<double>(r) - kd;
      const double j = static_cast<double>(c) - kd;
      double v;
      if (spec.kind == KernelSpec::Kind::Linear) {
        v = (1.0 - std::abs(i) / (kd + 1.0)) * (1.0 - std::abs(j) / (kd + 1.0));
      } else {
        const double sigma2 = kd * kd / 3.0;
        v = std::exp(-(i * i + j * j) / (2.0 * sigma2));
      }
      w.values[r * n + c] = v;
      sum += v;
    }
  }
  scale_inplace(w, 1.0 / sum);
  return w;
}

// Per-channel "same" 2D convolution of a [C,H,W] tensor with a square
// kernel. Out-of-range taps read zero (smoothing) or the clamped edge (blur).
inline Tensor conv_same(const Tensor& image, const Tensor& kernel, bool edge_clamp) {
  const std::size_t C = image.shape[0], H = image.shape[1], W = image.shape[2];
  const std::size_t n = kernel.shape[0];
  const long k = static_cast<long>(n / 2);
  Tensor out(image.shape);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        double acc = 0.0;
        for (long dy = -k; dy <= k; ++dy) {
          long sy = static_cast<long>(y) + dy;
          if (edge_clamp) {
            sy = std::clamp(sy, 0l, static_cast<long>(H) - 1);
          } else if (sy < 0 || sy >= static_cast<long>(H)) {
            continue;
          }
          for (long dx = -k; dx <= k; ++dx) {
            long sx = static_cast<long>(x) + dx;
            if (edge_clamp) {
              sx = std::clamp(sx, 0l, static_cast<long>(W) - 1);
            } else if (sx < 0 || sx >= static_cast<long>(W)) {
              continue;
            }
            acc += kernel.values[(dy + k) * n + (dx + k)] *
                   image.at(c, static_cast<std::size_t>(sy),
                            static_cast<std::size_t>(sx));
          }
        }
        out.at(c, y, x) = acc;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Obfuscation initialization

enum class InitMode { GaussianNoise, RandomPermute, GaussianBlur, CopyOriginal };

inline Tensor init_obfuscation(const Tensor& x, InitMode mode, std::uint64_t seed) {
  switch (mode) {
    case InitMode::GaussianNoise: {
      Tensor out(x.shape);
      auto s = rng::stream(seed, rng::kObfuscationInit);
      for (double& v : out.values) v = s.gaussian(0.5, 0.25);
      clamp01_inplace(out);
      return out;
    }
    case InitMode::RandomPermute: {
      auto s = rng::stream(seed, rng::kObfuscationInit);
      auto perm = s.permutation(x.size());
      Tensor out(x.shape);
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[perm[i]];
      return out;
    }
    case InitMode::GaussianBlur: {
      // sigma 4 px, 13x13 taps, edge-clamped
      const double sigma = 4.0;
      Tensor kernel({13, 13});
      double sum = 0.0;
      for (long i = -6; i <= 6; ++i) {
        for (long j = -6; j <= 6; ++j) {
          const double v = std::exp(-double(i * i + j * j) / (2.0 * sigma * sigma));
          kernel.values[(i + 6) * 13 + (j + 6)] = v;
          sum += v;
        }
      }
      scale_inplace(kernel, 1.0 / sum);
      return conv_same(x, kernel, /*edge_clamp=*/true);
    }
    case InitMode::CopyOriginal:
      return x;
  }
  throw ValueError("unknown init mode");
}

// ---------------------------------------------------------------------------
// Multi-layer feature aggregation (Perturbation-enhancement step 2)

inline constexpr std::size_t kAggregatePool = 4;

namespace detail {

inline std::size_t cell_lo(std::size_t i, std::size_t dim, std::size_t target) {
  return i * dim / target;
}

// Equal-cell adaptive average pooling of [C,H,W] to [C,t,t] (t = 4, or the
// map size when already smaller).
inline Tensor adaptive_pool(const Tensor& map, std::size_t target) {
  const std::size_t C = map.shape[0], H = map.shape[1], W = map.shape[2];
  const std::size_t th = std::min(target, H), tw = std::min(target, W);
  Tensor out({C, th, tw});
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t oy = 0; oy < th; ++oy) {
      const std::size_t y0 = cell_lo(oy, H, th), y1 = cell_lo(oy + 1, H, th);
      for (std::size_t ox = 0; ox < tw; ++ox) {
        const std::size_t x0 = cell_lo(ox, W, tw), x1 = cell_lo(ox + 1, W, tw);
        double acc = 0.0;
        for (std::size_t y = y0; y < y1; ++y) {
          for (std::size_t x = x0; x < x1; ++x) acc += map.at(c, y, x);
        }
        out.at(c, oy, ox) = acc / double((y1 - y0) * (x1 - x0));
      }
    }
  }
  return out;
}

inline void adaptive_pool_backward(const Tensor& out_grad, const Shape& in_shape,
                                   Tensor& in_grad) {
  const std::size_t C = in_shape[0], H = in_shape[1], W = in_shape[2];
  const std::size_t th = out_grad.shape[1], tw = out_grad.shape[2];
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t oy = 0; oy < th; ++oy) {
      const std::size_t y0 = cell_lo(oy, H, th), y1 = cell_lo(oy + 1, H, th);
      for (std::size_t ox = 0; ox < tw; ++ox) {
        const std::size_t x0 = cell_lo(ox, W, tw), x1 = cell_lo(ox + 1, W, tw);
        const double g = out_grad.at(c, oy, ox) / double((y1 - y0) * (x1 - x0));
        for (std::size_t y = y0; y < y1; ++y) {
          for (std::size_t x = x0; x < x1; ++x) in_grad.at(c, y, x) += g;
        }
      }
    }
  }
}

inline void check_aggregate_layers(const Model& shallow,
                                   const std::vector<std::size_t>& layers) {
  for (std::size_t l : layers) {
    if (l >= shallow.num_layers()) {
      throw ValueError("aggregate layer index " + std::to_string(l) +
                       " out of range for shallow model of " +
                       std::to_string(shallow.num_layers()) + " layers");
    }
  }
}

}  // namespace detail

// Concatenated alignment feature: for each l in `layers`, the layer-l output
// average-pooled to `pool_target` cells per side and flattened. Empty
// `layers` falls back to the raw final shallow output.
inline Tensor aggregate_from_activations(const Activations& acts,
                                         const std::vector<std::size_t>& layers,
                                         std::size_t pool_target = kAggregatePool) {
  if (layers.empty()) {
    return acts.back().reshaped({acts.back().size()});
  }
  std::vector<Tensor> parts;
  std::size_t total = 0;
  for (std::size_t l : layers) {
    const Tensor& a = acts[l + 1];
    if (a.shape.size() != 3) {
      throw ShapeError("aggregate layer " + std::to_string(l) +
                       " output is not a [C,H,W] map: " + shape_str(a.shape));
    }
    parts.push_back(detail::adaptive_pool(a, pool_target));
    total += parts.back().size();
  }
  Tensor out({total});
  std::size_t pos = 0;
  for (const Tensor& p : parts) {
    std::copy(p.values.begin(), p.values.end(), out.values.begin() + pos);
    pos += p.size();
  }
  return out;
}

inline Tensor aggregate_features(const Model& shallow, const Tensor& image,
                                 const std::vector<std::size_t>& layers,
                                 std::size_t pool_target = kAggregatePool) {
  detail::check_aggregate_layers(shallow, layers);
  return aggregate_from_activations(model_forward_collect(shallow, image), layers,
                                    pool_target);
}

// ---------------------------------------------------------------------------
// PMT configuration and optimizer

struct PmtConfig {
  InitMode init = InitMode::GaussianNoise;
  std::size_t iterations = 600;
  double step = 0.02;
  AugmentMode augment = AugmentMode::random_noise(0.1);
  std::vector<std::size_t> aggregate_layers{2, 5};
  std::size_t aggregate_pool = kAggregatePool;
  KernelSpec kernel = KernelSpec::gaussian(1);
  bool clamp_output = true;
  // Step along sign(delta) rather than delta itself; the effective variant
  // for image-space obfuscation, and the default.
  bool sign_update = true;
  std::uint64_t master_seed = 0;

  void validate() const {
    if (step <= 0.0) throw ValueError("pmt: step must be > 0");
    augment.validate();
  }
};

struct PmtObjective {
  double loss;
  Tensor grad;  // dJ/d(x_tilde), before normalization and smoothing
};

// J = sum((z - z_tilde)^2) over aggregated features of T(x) and T(x_tilde),
// with one shared augmentation draw; gradient w.r.t. x_tilde flows through
// the augmentation.
inline PmtObjective pmt_objective_grad(const Model& shallow, const Tensor& x,
                                       const Tensor& x_tilde,
                                       const std::vector<std::size_t>& layers,
                                       const AugmentDraw& draw,
                                       std::size_t pool_target = kAggregatePool) {
  detail::check_aggregate_layers(shallow, layers);
  const Tensor ax = draw.forward(x);
  const Tensor at = draw.forward(x_tilde);
  Activations acts_x = model_forward_collect(shallow, ax);
  Activations acts_t = model_forward_collect(shallow, at);
  Tensor z = aggregate_from_activations(acts_x, layers, pool_target);
  Tensor zt = aggregate_from_activations(acts_t, layers, pool_target);

  double loss = 0.0;
  Tensor dzt(zt.shape);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double d = z[i] - zt[i];
    loss += d * d;
    dzt[i] = 2.0 * (zt[i] - z[i]);
  }

  // scatter dJ/d(aggregated) back onto the contributing activations
  std::vector<Tensor> act_grads(acts_t.size());
  if (layers.empty()) {
    act_grads.back() = dzt.reshaped(acts_t.back().shape);
  } else {
    std::size_t pos = 0;
    for (std::size_t l : layers) {
      const Tensor& a = acts_t[l + 1];
      const std::size_t th = std::min(pool_target, a.shape[1]);
      const std::size_t tw = std::min(pool_target, a.shape[2]);
      Tensor pooled_grad({a.shape[0], th, tw});
      std::copy(dzt.values.begin() + pos, dzt.values.begin() + pos + pooled_grad.size(),
                pooled_grad.values.begin());
      pos += pooled_grad.size();
      if (act_grads[l + 1].size() == 0) act_grads[l + 1] = Tensor(a.shape);
      detail::adaptive_pool_backward(pooled_grad, a.shape, act_grads[l + 1]);
    }
  }

  Gradients g = model_backward_multi(shallow, acts_t, act_grads);
  return {loss, draw.backward(x_tilde, g.input_grad)};
}

struct PmtStepResult {
  Tensor delta;  // smoothed, L1-normalized gradient direction
  double loss;
  bool converged = false;
};

// One enhancement step: delta = W (x) (grad J / ||grad J||_1). A vanishing
// gradient is signalled as converged with delta == 0.
inline PmtStepResult pmt_step(const Model& shallow, const Tensor& x,
                              const Tensor& x_tilde, const PmtConfig& config,
                              std::size_t iter_index) {
  config.validate();
  const AugmentDraw draw =
      draw_augment(config.augment, x.shape,
                   rng::hash2(config.master_seed, iter_index));
  PmtObjective obj = pmt_objective_grad(shallow, x, x_tilde,
                                        config.aggregate_layers, draw,
                                        config.aggregate_pool);
  const double l1 = l1_norm(obj.grad);
  if (l1 < 1e-15) {
    return {Tensor(x.shape), obj.loss, true};
  }
  scale_inplace(obj.grad, 1.0 / l1);
  Tensor delta = config.kernel.kind == KernelSpec::Kind::None
                     ? std::move(obj.grad)
                     : conv_same(obj.grad, make_kernel(config.kernel), false);
  return {std::move(delta), obj.loss, false};
}

struct Obfuscation {
  Tensor image;                   // x_tilde
  Tensor features;                // shallow(x_tilde), raw final output
  std::vector<double> loss_trace; // J before each step, length K
};

namespace detail {

inline void apply_update(Tensor& x_tilde, const Tensor& delta,
                         const PmtConfig& config) {
  if (config.sign_update) {
    for (std::size_t i = 0; i < x_tilde.size(); ++i) {
      const double d = delta[i];
      x_tilde[i] -= config.step * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
    }
  } else {
    axpy_inplace(x_tilde, -config.step, delta);
  }
  if (config.clamp_output) clamp01_inplace(x_tilde);
}

}  // namespace detail

// Algorithm: initialize x_tilde, then descend K steps on the feature-matching
// objective, each step smoothed by the translation-invariant kernel.
inline Obfuscation pmt_protect(const Tensor& x, const Model& shallow,
                               const PmtConfig& config) {
  config.validate();
  Tensor x_tilde = init_obfuscation(x, config.init, config.master_seed);
  Obfuscation out;
  out.loss_trace.reserve(config.iterations);
  for (std::size_t i = 1; i <= config.iterations; ++i) {
    PmtStepResult step = pmt_step(shallow, x, x_tilde, config, i);
    out.loss_trace.push_back(step.loss);
    if (!step.converged) detail::apply_update(x_tilde, step.delta, config);
  }
  out.features = model_forward(shallow, x_tilde);
  out.image = std::move(x_tilde);
  return out;
}

struct MultiObfuscation {
  Tensor image;
  std::vector<Tensor> features;                 // per model
  std::vector<std::vector<double>> loss_traces; // per model, length K
};

// MR-PMT: one x_tilde against the sum of per-model objectives. Per-model
// gradients are L1-normalized and smoothed first, then summed and the sum
// renormalized to unit L1, so no model's scale dominates. M == 1 reduces to
// pmt_protect exactly.
inline MultiObfuscation pmt_protect_multi(const Tensor& x,
                                          const std::vector<Model>& shallows,
                                          const PmtConfig& config) {
  if (shallows.empty()) throw ValueError("pmt_protect_multi: no models");
  config.validate();
  const std::size_t m = shallows.size();
  if (m == 1) {
    Obfuscation single = pmt_protect(x, shallows[0], config);
    MultiObfuscation out;
    out.image = std::move(single.image);
    out.features.push_back(std::move(single.features));
    out.loss_traces.push_back(std::move(single.loss_trace));
    return out;
  }

  Tensor x_tilde = init_obfuscation(x, config.init, config.master_seed);
  MultiObfuscation out;
  out.loss_traces.assign(m, {});
  for (std::size_t i = 1; i <= config.iterations; ++i) {
    Tensor combined(x.shape);
    bool any = false;
    for (std::size_t mi = 0; mi < m; ++mi) {
      PmtStepResult step = pmt_step(shallows[mi], x, x_tilde, config, i);
      out.loss_traces[mi].push_back(step.loss);
      if (!step.converged) {
        add_inplace(combined, step.delta);
        any = true;
      }
    }
    if (!any) continue;
    const double l1 = l1_norm(combined);
    if (l1 < 1e-15) continue;
    scale_inplace(combined, 1.0 / l1);
    detail::apply_update(x_tilde, combined, config);
  }
  for (const Model& shallow : shallows) {
    out.features.push_back(model_forward(shallow, x_tilde));
  }
  out.image = std::move(x_tilde);
  return out;
}

}  // namespace pmt
