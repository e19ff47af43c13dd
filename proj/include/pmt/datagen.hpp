#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "pmt/rng.hpp"
#include "pmt/tensor.hpp"
#include "pmt/train.hpp"

namespace pmt {

inline constexpr std::size_t kImageSize = 32;

// Procedural identity: an elliptical "face" over a muted gradient background
// with eyes, a mouth, a fine per-identity skin texture, and a binary
// accessory tag (the synthetic private attribute). Coarse cues (colors,
// rough geometry) are deliberately kept weak so identity lives mostly in the
// mid/fine structure a recognizer has to learn filters for.
struct IdentityParams {
  double center_x, center_y;   // face ellipse center
  double axis_x, axis_y;       // face ellipse half-axes
  double skin_r, skin_g, skin_b;
  double eye_sep;              // eye offset from center, fraction of axis_x
  double eye_height;           // eye offset above center, fraction of axis_y
  double mouth_width;          // half-width, fraction of axis_x
  double mouth_curve;          // vertical bow, fraction of mouth half-width
  double bg_top[3], bg_bottom[3];
  std::uint64_t texture_seed;  // keys the high-frequency skin pattern
  bool attribute_tag;          // draws the accessory band across the eyes

  bool operator==(const IdentityParams&) const = default;
};

// Coarse ranges are deliberately tight: with 32x32 canvases, wide color or
// geometry ranges make identities separable from 4x4 thumbnails alone, and
// every model then learns the same trivial cues. Identity is carried almost
// entirely by the skin texture.
inline IdentityParams gen_identity(std::uint64_t identity_seed) {
  auto s = rng::stream(identity_seed, rng::kIdentity);
  IdentityParams p{};
  p.center_x = s.uniform(0.48, 0.52);
  p.center_y = s.uniform(0.48, 0.52);
  p.axis_x = s.uniform(0.31, 0.34);
  p.axis_y = s.uniform(0.35, 0.38);
  p.skin_r = s.uniform(0.67, 0.73);
  p.skin_g = s.uniform(0.55, 0.61);
  p.skin_b = s.uniform(0.46, 0.52);
  p.eye_sep = s.uniform(0.42, 0.50);
  p.eye_height = s.uniform(0.30, 0.38);
  p.mouth_width = s.uniform(0.44, 0.52);
  p.mouth_curve = s.uniform(-0.15, 0.15);
  for (int c = 0; c < 3; ++c) p.bg_top[c] = s.uniform(0.22, 0.28);
  for (int c = 0; c < 3; ++c) p.bg_bottom[c] = s.uniform(0.22, 0.28);
  p.texture_seed = s.next_u64();
  p.attribute_tag = s.next_unit() < 0.5;
  return p;
}

namespace detail {

// Per-identity skin texture: three oriented cosine gratings in the 2.5-6 px
// band, anchored to the face center so the pattern rides along with the
// whole-face jitter.
struct SkinTexture {
  double fx[3], fy[3], phase[3], amp[3];

  explicit SkinTexture(std::uint64_t texture_seed) {
    auto s = rng::Stream(texture_seed);
    for (int j = 0; j < 3; ++j) {
      const double freq = s.uniform(0.17, 0.40);  // cycles per pixel
      const double theta = s.uniform(0.0, 2.0 * std::numbers::pi);
      fx[j] = freq * std::cos(theta);
      fy[j] = freq * std::sin(theta);
      phase[j] = s.uniform(0.0, 2.0 * std::numbers::pi);
      amp[j] = s.uniform(0.06, 0.10);
    }
  }

  double operator()(double dx, double dy) const {
    double t = 0.0;
    for (int j = 0; j < 3; ++j) {
      t += amp[j] * std::cos(2.0 * std::numbers::pi * (fx[j] * dx + fy[j] * dy) +
                             phase[j]);
    }
    return t;
  }
};

}  // namespace detail

namespace detail {

// 1 inside, 0 outside, linear ramp of `edge` pixels.
inline double coverage(double signed_dist_px, double edge = 1.5) {
  const double a = 0.5 - signed_dist_px / edge;
  return a < 0.0 ? 0.0 : (a > 1.0 ? 1.0 : a);
}

inline void blend(double* px, double alpha, double r, double g, double b) {
  px[0] += alpha * (r - px[0]);
  px[1] += alpha * (g - px[1]);
  px[2] += alpha * (b - px[2]);
}

}  // namespace detail

// Deterministic 3x32x32 render. The variation seed perturbs brightness
// (+-0.1), feature positions (+-1 px) and adds sigma=0.02 noise; identity
// geometry dominates the variation.
inline Tensor render_face(const IdentityParams& id, std::uint64_t variation_seed) {
  auto vs = rng::stream(variation_seed, rng::kVariation);
  const double brightness = vs.uniform(-0.1, 0.1);
  const double jx = vs.uniform(-1.0, 1.0);  // px
  const double jy = vs.uniform(-1.0, 1.0);

  const double S = static_cast<double>(kImageSize);
  const double cx = id.center_x * S + jx;
  const double cy = id.center_y * S + jy;
  const double ax = id.axis_x * S;
  const double ay = id.axis_y * S;
  const double eye_y = cy - id.eye_height * ay;
  const double eye_dx = id.eye_sep * ax;
  const double eye_r = 0.052 * S;
  const double mouth_y = cy + 0.45 * ay;
  const double mouth_hw = id.mouth_width * ax;
  const detail::SkinTexture texture(id.texture_seed);

  Tensor img({3, kImageSize, kImageSize});
  std::vector<double> px(3);
  for (std::size_t y = 0; y < kImageSize; ++y) {
    for (std::size_t x = 0; x < kImageSize; ++x) {
      const double fx = static_cast<double>(x) + 0.5;
      const double fy = static_cast<double>(y) + 0.5;
      const double t = fy / S;
      for (int c = 0; c < 3; ++c) {
        px[c] = id.bg_top[c] + t * (id.bg_bottom[c] - id.bg_top[c]);
      }

      // face ellipse
      const double dx = (fx - cx) / ax, dy = (fy - cy) / ay;
      const double d = std::sqrt(dx * dx + dy * dy);
      const double face_edge_px = (d - 1.0) * std::min(ax, ay);
      const double face_a = detail::coverage(face_edge_px);
      if (face_a > 0.0) {
        const double tex = texture(fx - cx, fy - cy);
        detail::blend(px.data(), face_a, id.skin_r + tex, id.skin_g + tex,
                      id.skin_b + tex);

        // eyes
        for (double side : {-1.0, 1.0}) {
          const double ex = cx + side * eye_dx;
          const double er = std::hypot(fx - ex, fy - eye_y) - eye_r;
          const double a = detail::coverage(er, 1.0);
          if (a > 0.0) detail::blend(px.data(), a, 0.08, 0.08, 0.12);
        }

        // accessory band across the eyes (the private attribute)
        if (id.attribute_tag) {
          const double half_h = 0.055 * S;
          const double x_lo = cx - eye_dx - 2.8, x_hi = cx + eye_dx + 2.8;
          const double dxe = std::max({x_lo - fx, fx - x_hi, 0.0});
          const double dye = std::abs(fy - eye_y) - half_h;
          const double a = detail::coverage(std::max(dxe, dye), 1.0);
          if (a > 0.0) detail::blend(px.data(), a * 0.95, 0.04, 0.04, 0.05);
        }

        // mouth: shallow parabola, thickness ~0.8 px
        const double mx = (fx - cx) / std::max(mouth_hw, 1e-9);
        if (std::abs(mx) <= 1.25) {
          const double curve_y = mouth_y + id.mouth_curve * mouth_hw * (mx * mx - 0.5);
          const double dm = std::abs(fy - curve_y) - 0.8;
          const double xfade = detail::coverage((std::abs(mx) - 1.0) * mouth_hw, 1.5);
          const double a = detail::coverage(dm, 1.0) * xfade;
          if (a > 0.0) detail::blend(px.data(), a, 0.45, 0.15, 0.18);
        }
      }

      for (int c = 0; c < 3; ++c) img.at(c, y, x) = px[c];
    }
  }

  for (double& v : img.values) {
    v += brightness + vs.gaussian(0.0, 0.02);
  }
  clamp01_inplace(img);
  return img;
}

// Render `variation_index` of an identity; the draw is keyed by both so
// different identities never share a noise pattern.
inline Tensor render_indexed(std::uint64_t identity_seed, std::size_t variation_index) {
  return render_face(gen_identity(identity_seed),
                     rng::hash2(identity_seed, variation_index));
}

struct FaceDataset {
  std::vector<std::uint64_t> identity_seeds;
  std::size_t renders_per_id = 0;
  std::size_t variation_base = 0;
  std::vector<LabeledImage> images;  // label = identity index
  std::vector<bool> tags;            // attribute tag per image
};

inline FaceDataset make_dataset(std::size_t n_ids, std::size_t renders_per_id,
                                std::uint64_t base_seed,
                                std::size_t variation_base = 0) {
  FaceDataset ds;
  ds.renders_per_id = renders_per_id;
  ds.variation_base = variation_base;
  for (std::size_t i = 0; i < n_ids; ++i) {
    const std::uint64_t seed = base_seed + i;
    ds.identity_seeds.push_back(seed);
    const bool tag = gen_identity(seed).attribute_tag;
    for (std::size_t k = 0; k < renders_per_id; ++k) {
      ds.images.push_back({render_indexed(seed, variation_base + k), i});
      ds.tags.push_back(tag);
    }
  }
  return ds;
}

struct VerificationPair {
  Tensor image1, image2;
  bool same_identity;
};

// Balanced verification pairs: exactly count/2 positive and count/2 negative.
// Variation indices are drawn in [variation_base, variation_base + renders).
inline std::vector<VerificationPair> make_pairs(
    const std::vector<std::uint64_t>& identity_seeds, std::size_t renders_per_id,
    std::size_t pair_count, std::uint64_t pair_seed,
    std::size_t variation_base = 0) {
  if (identity_seeds.size() < 2) {
    throw ValueError("make_pairs: need at least 2 identities");
  }
  if (pair_count % 2 != 0) {
    throw ValueError("make_pairs: pair count must be even (got " +
                     std::to_string(pair_count) + ")");
  }
  if (renders_per_id < 2) {
    throw ValueError("make_pairs: need at least 2 renders per identity");
  }
  auto s = rng::stream(pair_seed, rng::kPairs);
  const std::size_t m = pair_count / 2;
  std::vector<VerificationPair> pairs;
  pairs.reserve(pair_count);
  for (std::size_t i = 0; i < m; ++i) {
    const std::uint64_t id = identity_seeds[s.below(identity_seeds.size())];
    const std::size_t v1 = s.below(renders_per_id);
    std::size_t v2 = s.below(renders_per_id - 1);
    if (v2 >= v1) ++v2;
    pairs.push_back({render_indexed(id, variation_base + v1),
                     render_indexed(id, variation_base + v2), true});
  }
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t a = s.below(identity_seeds.size());
    std::size_t b = s.below(identity_seeds.size() - 1);
    if (b >= a) ++b;
    pairs.push_back({render_indexed(identity_seeds[a],
                                    variation_base + s.below(renders_per_id)),
                     render_indexed(identity_seeds[b],
                                    variation_base + s.below(renders_per_id)),
                     false});
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// Augmentation T(.)

struct AugmentMode {
  enum class Kind { None, RandomNoise, RandomAffine, Mix } kind = Kind::None;
  double sigma = 0.1;          // RandomNoise / Mix
  double max_rot_deg = 10.0;   // RandomAffine / Mix
  double max_trans_px = 2.0;
  double scale_lo = 0.95, scale_hi = 1.05;

  static AugmentMode none() { return {}; }
  static AugmentMode random_noise(double sigma) {
    AugmentMode m;
    m.kind = Kind::RandomNoise;
    m.sigma = sigma;
    return m;
  }
  static AugmentMode random_affine(double rot = 10.0, double trans = 2.0,
                                   double lo = 0.95, double hi = 1.05) {
    AugmentMode m;
    m.kind = Kind::RandomAffine;
    m.max_rot_deg = rot;
    m.max_trans_px = trans;
    m.scale_lo = lo;
    m.scale_hi = hi;
    return m;
  }
  static AugmentMode mix() {
    AugmentMode m = random_affine();
    m.kind = Kind::Mix;
    return m;
  }

  void validate() const {
    if (sigma < 0.0) throw ValueError("augment: sigma must be >= 0");
    if (scale_lo > 1.0 || scale_hi < 1.0) {
      throw ValueError("augment: scale range must contain 1");
    }
  }
};

// A concrete sampled transform. Forward is differentiable in the image, so
// gradients can flow through T(.) during obfuscation updates.
struct AugmentDraw {
  bool has_affine = false;
  double angle = 0.0, scale = 1.0, tx = 0.0, ty = 0.0;
  bool has_noise = false;
  Tensor noise;

  Tensor warp(const Tensor& img) const {
    const std::size_t C = img.shape[0], H = img.shape[1], W = img.shape[2];
    const double cx = (static_cast<double>(W) - 1.0) / 2.0;
    const double cy = (static_cast<double>(H) - 1.0) / 2.0;
    const double ca = std::cos(angle), sa = std::sin(angle);
    Tensor out(img.shape);
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        // inverse map: undo translation, then rotation/scale about center
        const double ux = (static_cast<double>(x) - tx - cx) / scale;
        const double uy = (static_cast<double>(y) - ty - cy) / scale;
        double sx = ca * ux + sa * uy + cx;
        double sy = -sa * ux + ca * uy + cy;
        sx = std::clamp(sx, 0.0, static_cast<double>(W - 1));
        sy = std::clamp(sy, 0.0, static_cast<double>(H - 1));
        const std::size_t x0 = static_cast<std::size_t>(sx);
        const std::size_t y0 = static_cast<std::size_t>(sy);
        const std::size_t x1 = std::min(x0 + 1, W - 1);
        const std::size_t y1 = std::min(y0 + 1, H - 1);
        const double fx = sx - static_cast<double>(x0);
        const double fy = sy - static_cast<double>(y0);
        for (std::size_t c = 0; c < C; ++c) {
          const double v = (1 - fy) * ((1 - fx) * img.at(c, y0, x0) +
                                       fx * img.at(c, y0, x1)) +
                           fy * ((1 - fx) * img.at(c, y1, x0) +
                                 fx * img.at(c, y1, x1));
          out.at(c, y, x) = v;
        }
      }
    }
    return out;
  }

  void warp_backward(const Tensor& out_grad, Tensor& img_grad) const {
    const std::size_t C = out_grad.shape[0], H = out_grad.shape[1],
                      W = out_grad.shape[2];
    const double cx = (static_cast<double>(W) - 1.0) / 2.0;
    const double cy = (static_cast<double>(H) - 1.0) / 2.0;
    const double ca = std::cos(angle), sa = std::sin(angle);
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        const double ux = (static_cast<double>(x) - tx - cx) / scale;
        const double uy = (static_cast<double>(y) - ty - cy) / scale;
        double sx = ca * ux + sa * uy + cx;
        double sy = -sa * ux + ca * uy + cy;
        sx = std::clamp(sx, 0.0, static_cast<double>(W - 1));
        sy = std::clamp(sy, 0.0, static_cast<double>(H - 1));
        const std::size_t x0 = static_cast<std::size_t>(sx);
        const std::size_t y0 = static_cast<std::size_t>(sy);
        const std::size_t x1 = std::min(x0 + 1, W - 1);
        const std::size_t y1 = std::min(y0 + 1, H - 1);
        const double fx = sx - static_cast<double>(x0);
        const double fy = sy - static_cast<double>(y0);
        for (std::size_t c = 0; c < C; ++c) {
          const double g = out_grad.at(c, y, x);
          img_grad.at(c, y0, x0) += g * (1 - fy) * (1 - fx);
          img_grad.at(c, y0, x1) += g * (1 - fy) * fx;
          img_grad.at(c, y1, x0) += g * fy * (1 - fx);
          img_grad.at(c, y1, x1) += g * fy * fx;
        }
      }
    }
  }

  Tensor forward(const Tensor& img) const {
    Tensor out = has_affine ? warp(img) : img;
    if (has_noise) {
      add_inplace(out, noise);
      clamp01_inplace(out);
    }
    return out;
  }

  // d(forward)/d(img)^T applied to out_grad. The clamp after noise passes
  // gradient only where the pre-clamp value stayed inside [0,1].
  Tensor backward(const Tensor& img, const Tensor& out_grad) const {
    Tensor g = out_grad;
    if (has_noise) {
      Tensor pre = has_affine ? warp(img) : img;
      add_inplace(pre, noise);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (pre[i] < 0.0 || pre[i] > 1.0) g[i] = 0.0;
      }
    }
    if (!has_affine) return g;
    Tensor gx(img.shape);
    warp_backward(g, gx);
    return gx;
  }
};

inline AugmentDraw draw_augment(const AugmentMode& mode, const Shape& shape,
                                std::uint64_t draw_seed) {
  mode.validate();
  AugmentDraw d;
  if (mode.kind == AugmentMode::Kind::None) return d;
  auto s = rng::stream(draw_seed, rng::kAugment);
  if (mode.kind == AugmentMode::Kind::RandomAffine ||
      mode.kind == AugmentMode::Kind::Mix) {
    d.has_affine = true;
    d.angle = s.uniform(-mode.max_rot_deg, mode.max_rot_deg) *
              std::numbers::pi / 180.0;
    d.tx = s.uniform(-mode.max_trans_px, mode.max_trans_px);
    d.ty = s.uniform(-mode.max_trans_px, mode.max_trans_px);
    d.scale = s.uniform(mode.scale_lo, mode.scale_hi);
  }
  if (mode.kind == AugmentMode::Kind::RandomNoise ||
      mode.kind == AugmentMode::Kind::Mix) {
    d.has_noise = true;
    d.noise = Tensor(shape);
    if (mode.sigma > 0.0) {
      for (double& v : d.noise.values) v = s.gaussian(0.0, mode.sigma);
    }
  }
  return d;
}

inline Tensor augment(const Tensor& image, const AugmentMode& mode,
                      std::uint64_t draw_seed) {
  return draw_augment(mode, image.shape, draw_seed).forward(image);
}

}  // namespace pmt
