#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "pmt/attacks.hpp"
#include "pmt/datagen.hpp"
#include "pmt/model.hpp"
#include "pmt/parallel.hpp"
#include "pmt/pmt.hpp"
#include "pmt/rng.hpp"
#include "pmt/tensor.hpp"

namespace pmt {

inline constexpr std::size_t kSsimWindow = 7;

// Windowed SSIM: 7x7 uniform window, stride 1, valid positions, C1=(0.01)^2,
// C2=(0.03)^2 on unit range; per-channel mean, then channel mean. Computed
// with summed-area tables.
inline double ssim(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "ssim");
  if (a.shape.size() != 3) {
    throw ShapeError("ssim: expected [C,H,W], got " + shape_str(a.shape));
  }
  const std::size_t C = a.shape[0], H = a.shape[1], W = a.shape[2];
  if (H < kSsimWindow || W < kSsimWindow) {
    throw ShapeError("ssim: image smaller than the 7x7 window");
  }
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  const std::size_t n = kSsimWindow * kSsimWindow;
  const double inv_n = 1.0 / static_cast<double>(n);
  const std::size_t SW = W + 1;

  std::vector<double> sa(SW * (H + 1)), sb(sa.size()), saa(sa.size()),
      sbb(sa.size()), sab(sa.size());
  double channel_mean = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        const double va = a.at(c, y, x), vb = b.at(c, y, x);
        const std::size_t i = (y + 1) * SW + (x + 1);
        const std::size_t up = i - SW;
        sa[i] = va + sa[i - 1] + sa[up] - sa[up - 1];
        sb[i] = vb + sb[i - 1] + sb[up] - sb[up - 1];
        saa[i] = va * va + saa[i - 1] + saa[up] - saa[up - 1];
        sbb[i] = vb * vb + sbb[i - 1] + sbb[up] - sbb[up - 1];
        sab[i] = va * vb + sab[i - 1] + sab[up] - sab[up - 1];
      }
    }
    auto window = [&](const std::vector<double>& s, std::size_t y, std::size_t x) {
      const std::size_t y1 = y + kSsimWindow, x1 = x + kSsimWindow;
      return s[y1 * SW + x1] - s[y * SW + x1] - s[y1 * SW + x] + s[y * SW + x];
    };
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t y = 0; y + kSsimWindow <= H; ++y) {
      for (std::size_t x = 0; x + kSsimWindow <= W; ++x) {
        const double mu_a = window(sa, y, x) * inv_n;
        const double mu_b = window(sb, y, x) * inv_n;
        const double var_a = window(saa, y, x) * inv_n - mu_a * mu_a;
        const double var_b = window(sbb, y, x) * inv_n - mu_b * mu_b;
        const double cov = window(sab, y, x) * inv_n - mu_a * mu_b;
        acc += ((2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2)) /
               ((mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2));
        ++count;
      }
    }
    channel_mean += acc / static_cast<double>(count);
  }
  return channel_mean / static_cast<double>(C);
}

// 10*log10(range^2 / MSE), range 1; zero MSE reported as the 100 dB cap.
inline double psnr(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "psnr");
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse == 0.0) return 100.0;
  return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

inline double cos_sim(const Tensor& u, const Tensor& v) {
  if (u.size() != v.size()) {
    throw ShapeError("cos_sim: length mismatch " + std::to_string(u.size()) +
                     " vs " + std::to_string(v.size()));
  }
  const double nu = l2_norm(u), nv = l2_norm(v);
  if (nu == 0.0 || nv == 0.0) throw ValueError("cos_sim: zero-norm input");
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) d += u[i] * v[i];
  return std::clamp(d / (nu * nv), -1.0, 1.0);
}

// Success rate of reconstruction attack: fraction of reconstructions the
// authorized model still matches to the original.
inline double srra(const std::vector<Tensor>& originals,
                   const std::vector<Tensor>& reconstructions,
                   const Model& authorized, double kappa) {
  if (originals.size() != reconstructions.size()) {
    throw ValueError("srra: count mismatch");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < originals.size(); ++i) {
    hits += cos_sim(embed(authorized, reconstructions[i]),
                    embed(authorized, originals[i])) > kappa;
  }
  return static_cast<double>(hits) / static_cast<double>(originals.size());
}

// Image transform with the pair index available for seed derivation.
using ProtectFn = std::function<Tensor(const Tensor&, std::size_t)>;

inline ProtectFn identity_protect() {
  return [](const Tensor& x, std::size_t) { return x; };
}

// Strict verification accuracy: the protected first image must both match
// its own original and reproduce the ground-truth decision against the
// second image.
inline double verification_accuracy(const Model& model, const ProtectFn& protect,
                                    const std::vector<VerificationPair>& pairs,
                                    double kappa) {
  if (pairs.empty()) throw ValueError("verification_accuracy: empty pair list");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const VerificationPair& p = pairs[i];
    const Tensor protected1 = protect(p.image1, i);
    const Tensor et = embed(model, protected1);
    const bool self_match = cos_sim(et, embed(model, p.image1)) > kappa;
    const bool cross_match = cos_sim(et, embed(model, p.image2)) > kappa;
    hits += self_match && (cross_match == p.same_identity);
  }
  return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

// ---------------------------------------------------------------------------
// Utility-privacy score

struct UpParams {
  double sigma = 0.1;
  double kappa = 0.5;
  std::size_t trials = 8;
  Model probe;                        // fixed, never trained
  std::vector<std::size_t> probe_layers = kProbeLayers;
  std::uint64_t seed = 0;
  std::size_t workers = 4;

  void validate() const {
    if (sigma < 0.0) throw ValueError("up: sigma must be >= 0");
    if (kappa <= -1.0 || kappa >= 1.0) throw ValueError("up: kappa must be in (-1,1)");
    if (trials < 1) throw ValueError("up: trials must be >= 1");
    if (probe.num_layers() == 0) throw ValueError("up: probe model not built");
  }
};

inline UpParams default_up_params(double sigma, double kappa, std::size_t trials,
                                  std::uint64_t seed) {
  UpParams p;
  p.sigma = sigma;
  p.kappa = kappa;
  p.trials = trials;
  p.seed = seed;
  p.probe = build_model(default_recognizer_spec(0), kProbeSeed);
  return p;
}

struct UpResult {
  double utility = 0.0;
  double privacy = 0.0;
  double total = 0.0;
};

namespace detail {

// Cosine over pooled probe maps with the per-channel mean removed, so the
// score reads spatial structure rather than shared channel statistics.
// All-zero (structure-free) pairs count as identical, one-sided zeros as
// fully dissimilar.
inline double probe_layer_cos(Tensor fa, Tensor fb) {
  const std::size_t C = fa.shape[0];
  const std::size_t S = fa.shape[1] * fa.shape[2];
  for (Tensor* t : {&fa, &fb}) {
    for (std::size_t c = 0; c < C; ++c) {
      double m = 0.0;
      for (std::size_t i = 0; i < S; ++i) m += t->values[c * S + i];
      m /= static_cast<double>(S);
      for (std::size_t i = 0; i < S; ++i) t->values[c * S + i] -= m;
    }
  }
  const double na = l2_norm(fa), nb = l2_norm(fb);
  if (na == 0.0 && nb == 0.0) return 1.0;
  if (na == 0.0 || nb == 0.0) return 0.0;
  double d = 0.0;
  for (std::size_t i = 0; i < fa.size(); ++i) d += fa[i] * fb[i];
  return d / (na * nb);
}

}  // namespace detail

// UP(sigma, kappa): utility is the noise-robust authorized match rate between
// protected and original images; privacy is the mean multi-layer perceptual
// distance under the fixed probe, clipped to [0,1].
inline UpResult up_metric(const std::vector<Tensor>& originals,
                          const std::vector<Tensor>& protecteds,
                          const Model& authorized, const UpParams& params) {
  params.validate();
  if (originals.size() != protecteds.size()) {
    throw ValueError("up_metric: count mismatch");
  }
  detail::check_aggregate_layers(params.probe, params.probe_layers);
  const std::size_t n = originals.size();
  const std::size_t kp = params.probe_layers.size();
  std::vector<double> utility(n, 0.0), privacy(n, 0.0);

  parallel_for(
      n,
      [&](std::size_t i) {
        double u = 0.0, p = 0.0;
        for (std::size_t t = 0; t < params.trials; ++t) {
          Tensor x = originals[i];
          Tensor xt = protecteds[i];
          if (params.sigma > 0.0) {
            auto sx = rng::stream(params.seed, rng::kUpNoise, rng::hash3(i, t, 0));
            auto st = rng::stream(params.seed, rng::kUpNoise, rng::hash3(i, t, 1));
            for (double& v : x.values) v += sx.gaussian(0.0, params.sigma);
            for (double& v : xt.values) v += st.gaussian(0.0, params.sigma);
            clamp01_inplace(x);
            clamp01_inplace(xt);
          }
          u += cos_sim(embed(authorized, x), embed(authorized, xt)) > params.kappa;

          Activations ax = model_forward_collect(params.probe, x);
          Activations at = model_forward_collect(params.probe, xt);
          double dist = 0.0;
          for (std::size_t l : params.probe_layers) {
            const Tensor fa = detail::adaptive_pool(ax[l + 1], kProbePool);
            const Tensor fb = detail::adaptive_pool(at[l + 1], kProbePool);
            dist += 1.0 - detail::probe_layer_cos(fa, fb);
          }
          dist /= static_cast<double>(kp);
          p += std::clamp(dist, 0.0, 1.0);
        }
        utility[i] = u / static_cast<double>(params.trials);
        privacy[i] = p / static_cast<double>(params.trials);
      },
      params.workers);

  UpResult r;
  for (std::size_t i = 0; i < n; ++i) {
    r.utility += utility[i];
    r.privacy += privacy[i];
  }
  r.utility /= static_cast<double>(n);
  r.privacy /= static_cast<double>(n);
  r.total = r.utility + r.privacy;
  return r;
}

// Eq.-12 style attribute consistency: cosine of the probe's probability
// vectors for the original and obfuscated image.
inline double attribute_cos_sim(const Model& probe, const Tensor& x,
                                const Tensor& x_tilde) {
  return cos_sim(attribute_estimate(probe, x_tilde), attribute_estimate(probe, x));
}

// ---------------------------------------------------------------------------
// Metric report rows

struct MetricReport {
  std::string experiment;
  std::string case_name;
  std::map<std::string, double> values;
  std::size_t n_images = 0;
  std::size_t n_pairs = 0;
};

inline const std::vector<std::string>& metric_columns() {
  static const std::vector<std::string> cols{
      "ssim",       "psnr",       "cos",      "srra",        "acc",
      "up_utility", "up_privacy", "up_total", "attr_cossim",
  };
  return cols;
}

}  // namespace pmt
