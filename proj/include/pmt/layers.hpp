#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pmt/rng.hpp"
#include "pmt/tensor.hpp"

namespace pmt {

enum class LayerKind {
  Conv2d,
  ReLU,
  Sigmoid,
  AvgPool2d,
  UpsampleNearest2x,
  Flatten,
  Linear,
  L2Normalize,
};

// One entry of the fixed layer vocabulary. Only Conv2d / Linear carry
// parameters; AvgPool2d reuses `kernel` as its window (stride == window).
struct LayerSpec {
  LayerKind kind;
  std::size_t in_ch = 0, out_ch = 0;
  std::size_t kernel = 0, stride = 1, padding = 0;
  std::size_t in_dim = 0, out_dim = 0;
  bool with_bias = true;

  static LayerSpec conv2d(std::size_t in, std::size_t out, std::size_t k,
                          std::size_t stride = 1, std::size_t pad = 0,
                          bool bias = true) {
    LayerSpec s{LayerKind::Conv2d};
    s.in_ch = in;
    s.out_ch = out;
    s.kernel = k;
    s.stride = stride;
    s.padding = pad;
    s.with_bias = bias;
    return s;
  }
  static LayerSpec relu() { return LayerSpec{LayerKind::ReLU}; }
  static LayerSpec sigmoid() { return LayerSpec{LayerKind::Sigmoid}; }
  static LayerSpec avg_pool2d(std::size_t k) {
    LayerSpec s{LayerKind::AvgPool2d};
    s.kernel = k;
    return s;
  }
  static LayerSpec upsample_nearest_2x() {
    return LayerSpec{LayerKind::UpsampleNearest2x};
  }
  static LayerSpec flatten() { return LayerSpec{LayerKind::Flatten}; }
  static LayerSpec linear(std::size_t in, std::size_t out, bool bias = true) {
    LayerSpec s{LayerKind::Linear};
    s.in_dim = in;
    s.out_dim = out;
    s.with_bias = bias;
    return s;
  }
  static LayerSpec l2_normalize() { return LayerSpec{LayerKind::L2Normalize}; }

  bool has_params() const {
    return kind == LayerKind::Conv2d || kind == LayerKind::Linear;
  }

  std::string name() const {
    switch (kind) {
      case LayerKind::Conv2d: return "Conv2d";
      case LayerKind::ReLU: return "ReLU";
      case LayerKind::Sigmoid: return "Sigmoid";
      case LayerKind::AvgPool2d: return "AvgPool2d";
      case LayerKind::UpsampleNearest2x: return "UpsampleNearest2x";
      case LayerKind::Flatten: return "Flatten";
      case LayerKind::Linear: return "Linear";
      case LayerKind::L2Normalize: return "L2Normalize";
    }
    return "?";
  }

  void validate(std::size_t layer_index) const {
    auto fail = [&](const std::string& msg) {
      throw ValueError("layer " + std::to_string(layer_index) + " (" + name() +
                       "): " + msg);
    };
    switch (kind) {
      case LayerKind::Conv2d:
        if (in_ch == 0 || out_ch == 0 || kernel == 0 || stride == 0) {
          fail("sizes must be positive");
        }
        if (padding >= kernel) fail("padding must be < kernel");
        break;
      case LayerKind::AvgPool2d:
        if (kernel == 0) fail("kernel must be positive");
        break;
      case LayerKind::Linear:
        if (in_dim == 0 || out_dim == 0) fail("sizes must be positive");
        break;
      default:
        break;
    }
  }
};

namespace detail {

inline ShapeError layer_shape_error(std::size_t index, const LayerSpec& spec,
                                    const std::string& expected,
                                    const Shape& actual) {
  return ShapeError("layer " + std::to_string(index) + " (" + spec.name() +
                    "): expected input " + expected + ", got " +
                    shape_str(actual));
}

}  // namespace detail

// Output shape for `spec` applied to `in`; throws ShapeError naming the layer.
inline Shape layer_output_shape(const LayerSpec& spec, const Shape& in,
                                std::size_t layer_index = 0) {
  switch (spec.kind) {
    case LayerKind::Conv2d: {
      if (in.size() != 3 || in[0] != spec.in_ch ||
          in[1] + 2 * spec.padding < spec.kernel ||
          in[2] + 2 * spec.padding < spec.kernel) {
        throw detail::layer_shape_error(
            layer_index, spec,
            "[" + std::to_string(spec.in_ch) + ",H,W] with H,W+2p >= k", in);
      }
      std::size_t oh = (in[1] + 2 * spec.padding - spec.kernel) / spec.stride + 1;
      std::size_t ow = (in[2] + 2 * spec.padding - spec.kernel) / spec.stride + 1;
      return {spec.out_ch, oh, ow};
    }
    case LayerKind::AvgPool2d: {
      if (in.size() != 3 || in[1] < spec.kernel || in[2] < spec.kernel) {
        throw detail::layer_shape_error(layer_index, spec, "[C,H,W] with H,W >= k", in);
      }
      return {in[0], in[1] / spec.kernel, in[2] / spec.kernel};
    }
    case LayerKind::UpsampleNearest2x: {
      if (in.size() != 3) {
        throw detail::layer_shape_error(layer_index, spec, "[C,H,W]", in);
      }
      return {in[0], in[1] * 2, in[2] * 2};
    }
    case LayerKind::Flatten:
      return {shape_numel(in)};
    case LayerKind::Linear: {
      if (in.size() != 1 || in[0] != spec.in_dim) {
        throw detail::layer_shape_error(
            layer_index, spec, "[" + std::to_string(spec.in_dim) + "]", in);
      }
      return {spec.out_dim};
    }
    case LayerKind::ReLU:
    case LayerKind::Sigmoid:
    case LayerKind::L2Normalize:
      return in;
  }
  throw ValueError("unknown layer kind");
}

// Parameter shapes: Conv2d -> {[out,in,k,k], [out]}, Linear -> {[out,in], [out]}.
inline std::vector<Shape> layer_param_shapes(const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::Conv2d: {
      std::vector<Shape> s{{spec.out_ch, spec.in_ch, spec.kernel, spec.kernel}};
      if (spec.with_bias) s.push_back({spec.out_ch});
      return s;
    }
    case LayerKind::Linear: {
      std::vector<Shape> s{{spec.out_dim, spec.in_dim}};
      if (spec.with_bias) s.push_back({spec.out_dim});
      return s;
    }
    default:
      return {};
  }
}

inline std::size_t layer_fan_in(const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::Conv2d: return spec.in_ch * spec.kernel * spec.kernel;
    case LayerKind::Linear: return spec.in_dim;
    default: return 0;
  }
}

namespace detail {

inline void check_params(const LayerSpec& spec, const std::vector<Tensor>& params,
                         std::size_t layer_index) {
  auto want = layer_param_shapes(spec);
  if (params.size() != want.size()) {
    throw ShapeError("layer " + std::to_string(layer_index) + " (" + spec.name() +
                     "): expected " + std::to_string(want.size()) +
                     " parameter tensors, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (params[i].shape != want[i]) {
      throw ShapeError("layer " + std::to_string(layer_index) + " (" + spec.name() +
                       "): parameter " + std::to_string(i) + " shape " +
                       shape_str(params[i].shape) + ", expected " +
                       shape_str(want[i]));
    }
  }
}

inline Tensor conv2d_forward(const LayerSpec& s, const Tensor& w, const Tensor* b,
                             const Tensor& x, const Shape& out_shape) {
  const std::size_t H = x.shape[1], W = x.shape[2];
  const std::size_t OH = out_shape[1], OW = out_shape[2];
  const std::size_t K = s.kernel;
  const long P = static_cast<long>(s.padding);
  Tensor y(out_shape);
  for (std::size_t oc = 0; oc < s.out_ch; ++oc) {
    double* yp = &y.values[oc * OH * OW];
    if (b) {
      const double bv = (*b)[oc];
      for (std::size_t i = 0; i < OH * OW; ++i) yp[i] = bv;
    }
    for (std::size_t ic = 0; ic < s.in_ch; ++ic) {
      const double* xp = &x.values[ic * H * W];
      const double* wp = &w.values[((oc * s.in_ch) + ic) * K * K];
      for (std::size_t ky = 0; ky < K; ++ky) {
        for (std::size_t kx = 0; kx < K; ++kx) {
          const double wv = wp[ky * K + kx];
          if (wv == 0.0) continue;
          for (std::size_t oy = 0; oy < OH; ++oy) {
            const long iy = static_cast<long>(oy * s.stride + ky) - P;
            if (iy < 0 || iy >= static_cast<long>(H)) continue;
            const double* xrow = xp + iy * static_cast<long>(W);
            double* yrow = yp + oy * OW;
            for (std::size_t ox = 0; ox < OW; ++ox) {
              const long ix = static_cast<long>(ox * s.stride + kx) - P;
              if (ix < 0 || ix >= static_cast<long>(W)) continue;
              yrow[ox] += wv * xrow[ix];
            }
          }
        }
      }
    }
  }
  return y;
}

inline void conv2d_backward(const LayerSpec& s, const Tensor& w, const Tensor& x,
                            const Tensor& gy, Tensor& gx, Tensor& gw, Tensor* gb) {
  const std::size_t H = x.shape[1], W = x.shape[2];
  const std::size_t OH = gy.shape[1], OW = gy.shape[2];
  const std::size_t K = s.kernel;
  const long P = static_cast<long>(s.padding);
  for (std::size_t oc = 0; oc < s.out_ch; ++oc) {
    const double* gyp = &gy.values[oc * OH * OW];
    if (gb) {
      double acc = 0.0;
      for (std::size_t i = 0; i < OH * OW; ++i) acc += gyp[i];
      (*gb)[oc] += acc;
    }
    for (std::size_t ic = 0; ic < s.in_ch; ++ic) {
      const double* xp = &x.values[ic * H * W];
      double* gxp = &gx.values[ic * H * W];
      const double* wp = &w.values[((oc * s.in_ch) + ic) * K * K];
      double* gwp = &gw.values[((oc * s.in_ch) + ic) * K * K];
      for (std::size_t ky = 0; ky < K; ++ky) {
        for (std::size_t kx = 0; kx < K; ++kx) {
          const double wv = wp[ky * K + kx];
          double gwacc = 0.0;
          for (std::size_t oy = 0; oy < OH; ++oy) {
            const long iy = static_cast<long>(oy * s.stride + ky) - P;
            if (iy < 0 || iy >= static_cast<long>(H)) continue;
            const double* xrow = xp + iy * static_cast<long>(W);
            double* gxrow = gxp + iy * static_cast<long>(W);
            const double* gyrow = gyp + oy * OW;
            for (std::size_t ox = 0; ox < OW; ++ox) {
              const long ix = static_cast<long>(ox * s.stride + kx) - P;
              if (ix < 0 || ix >= static_cast<long>(W)) continue;
              const double g = gyrow[ox];
              gwacc += g * xrow[ix];
              gxrow[ix] += g * wv;
            }
          }
          gwp[ky * K + kx] += gwacc;
        }
      }
    }
  }
}

}  // namespace detail

// Pure forward pass of one layer. `params` must be present exactly when the
// layer has parameters.
inline Tensor layer_forward(const LayerSpec& spec, const std::vector<Tensor>& params,
                            const Tensor& input, std::size_t layer_index = 0) {
  detail::check_params(spec, params, layer_index);
  Shape out_shape = layer_output_shape(spec, input.shape, layer_index);
  switch (spec.kind) {
    case LayerKind::Conv2d:
      return detail::conv2d_forward(spec, params[0],
                                    spec.with_bias ? &params[1] : nullptr, input,
                                    out_shape);
    case LayerKind::ReLU: {
      Tensor y(input.shape);
      for (std::size_t i = 0; i < input.size(); ++i) {
        y[i] = input[i] > 0.0 ? input[i] : 0.0;
      }
      return y;
    }
    case LayerKind::Sigmoid: {
      Tensor y(input.shape);
      for (std::size_t i = 0; i < input.size(); ++i) {
        y[i] = 1.0 / (1.0 + std::exp(-input[i]));
      }
      return y;
    }
    case LayerKind::AvgPool2d: {
      const std::size_t K = spec.kernel;
      const std::size_t C = input.shape[0], OH = out_shape[1], OW = out_shape[2];
      Tensor y(out_shape);
      const double inv = 1.0 / static_cast<double>(K * K);
      for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t oy = 0; oy < OH; ++oy) {
          for (std::size_t ox = 0; ox < OW; ++ox) {
            double acc = 0.0;
            for (std::size_t ky = 0; ky < K; ++ky) {
              for (std::size_t kx = 0; kx < K; ++kx) {
                acc += input.at(c, oy * K + ky, ox * K + kx);
              }
            }
            y.at(c, oy, ox) = acc * inv;
          }
        }
      }
      return y;
    }
    case LayerKind::UpsampleNearest2x: {
      const std::size_t C = input.shape[0], H = input.shape[1], W = input.shape[2];
      Tensor y(out_shape);
      for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t iy = 0; iy < H; ++iy) {
          for (std::size_t ix = 0; ix < W; ++ix) {
            const double v = input.at(c, iy, ix);
            y.at(c, 2 * iy, 2 * ix) = v;
            y.at(c, 2 * iy, 2 * ix + 1) = v;
            y.at(c, 2 * iy + 1, 2 * ix) = v;
            y.at(c, 2 * iy + 1, 2 * ix + 1) = v;
          }
        }
      }
      return y;
    }
    case LayerKind::Flatten:
      return input.reshaped(out_shape);
    case LayerKind::Linear: {
      const Tensor& w = params[0];
      Tensor y(out_shape);
      for (std::size_t o = 0; o < spec.out_dim; ++o) {
        double acc = spec.with_bias ? params[1][o] : 0.0;
        const double* wrow = &w.values[o * spec.in_dim];
        for (std::size_t i = 0; i < spec.in_dim; ++i) acc += wrow[i] * input[i];
        y[o] = acc;
      }
      return y;
    }
    case LayerKind::L2Normalize: {
      double n = l2_norm(input);
      if (n < 1e-12) n = 1e-12;
      Tensor y(input.shape);
      for (std::size_t i = 0; i < input.size(); ++i) y[i] = input[i] / n;
      return y;
    }
  }
  throw ValueError("unknown layer kind");
}

// Reverse-mode step for one layer: accumulates input gradient into `gx`
// (same shape as `input`, caller-zeroed) and parameter gradients into
// `gparams` (shapes of layer_param_shapes, caller-zeroed).
inline void layer_backward(const LayerSpec& spec, const std::vector<Tensor>& params,
                           const Tensor& input, const Tensor& output,
                           const Tensor& output_grad, Tensor& gx,
                           std::vector<Tensor>& gparams,
                           std::size_t layer_index = 0) {
  check_same_shape(output_grad, output, "layer_backward output_grad");
  switch (spec.kind) {
    case LayerKind::Conv2d:
      detail::conv2d_backward(spec, params[0], input, output_grad, gx, gparams[0],
                              spec.with_bias ? &gparams[1] : nullptr);
      return;
    case LayerKind::ReLU:
      // subgradient 0 at the kink
      for (std::size_t i = 0; i < input.size(); ++i) {
        if (input[i] > 0.0) gx[i] += output_grad[i];
      }
      return;
    case LayerKind::Sigmoid:
      for (std::size_t i = 0; i < input.size(); ++i) {
        gx[i] += output_grad[i] * output[i] * (1.0 - output[i]);
      }
      return;
    case LayerKind::AvgPool2d: {
      const std::size_t K = spec.kernel;
      const std::size_t C = output.shape[0], OH = output.shape[1],
                        OW = output.shape[2];
      const double inv = 1.0 / static_cast<double>(K * K);
      for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t oy = 0; oy < OH; ++oy) {
          for (std::size_t ox = 0; ox < OW; ++ox) {
            const double g = output_grad.at(c, oy, ox) * inv;
            for (std::size_t ky = 0; ky < K; ++ky) {
              for (std::size_t kx = 0; kx < K; ++kx) {
                gx.at(c, oy * K + ky, ox * K + kx) += g;
              }
            }
          }
        }
      }
      return;
    }
    case LayerKind::UpsampleNearest2x: {
      const std::size_t C = input.shape[0], H = input.shape[1], W = input.shape[2];
      for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t iy = 0; iy < H; ++iy) {
          for (std::size_t ix = 0; ix < W; ++ix) {
            gx.at(c, iy, ix) += output_grad.at(c, 2 * iy, 2 * ix) +
                                output_grad.at(c, 2 * iy, 2 * ix + 1) +
                                output_grad.at(c, 2 * iy + 1, 2 * ix) +
                                output_grad.at(c, 2 * iy + 1, 2 * ix + 1);
          }
        }
      }
      return;
    }
    case LayerKind::Flatten:
      for (std::size_t i = 0; i < input.size(); ++i) gx[i] += output_grad[i];
      return;
    case LayerKind::Linear: {
      const Tensor& w = params[0];
      for (std::size_t o = 0; o < spec.out_dim; ++o) {
        const double g = output_grad[o];
        if (spec.with_bias) gparams[1][o] += g;
        const double* wrow = &w.values[o * spec.in_dim];
        double* gwrow = &gparams[0].values[o * spec.in_dim];
        for (std::size_t i = 0; i < spec.in_dim; ++i) {
          gwrow[i] += g * input[i];
          gx[i] += g * wrow[i];
        }
      }
      return;
    }
    case LayerKind::L2Normalize: {
      double n = l2_norm(input);
      if (n < 1e-12) n = 1e-12;
      // d(x/n)/dx applied to g: (g - y*(y.g)) / n
      double yg = 0.0;
      for (std::size_t i = 0; i < input.size(); ++i) yg += output[i] * output_grad[i];
      for (std::size_t i = 0; i < input.size(); ++i) {
        gx[i] += (output_grad[i] - output[i] * yg) / n;
      }
      return;
    }
  }
  throw ValueError("unknown layer kind");
}

// Deterministic parameter init: weights uniform in +-sqrt(6/fan_in) from the
// counter stream keyed by (seed, layer index); biases zero.
inline std::vector<Tensor> init_layer_params(const LayerSpec& spec,
                                             std::uint64_t seed,
                                             std::size_t layer_index) {
  std::vector<Tensor> out;
  auto shapes = layer_param_shapes(spec);
  if (shapes.empty()) return out;
  const double bound = std::sqrt(6.0 / static_cast<double>(layer_fan_in(spec)));
  auto s = rng::stream(seed, rng::kParamInit, layer_index);
  Tensor w(shapes[0]);
  for (double& v : w.values) v = s.uniform(-bound, bound);
  out.push_back(std::move(w));
  if (shapes.size() > 1) out.emplace_back(shapes[1]);  // zero bias
  return out;
}

}  // namespace pmt
