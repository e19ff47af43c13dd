#pragma once

#include <cmath>

#include "pmt/tensor.hpp"

namespace pmt {

// Total variation with exponent beta, summed over channels:
// sum_{i,j} ((x[i][j-1]-x[i][j])^2 + (x[i+1][j]-x[i][j])^2)^(beta/2),
// out-of-range neighbor terms skipped.
inline double total_variation(const Tensor& image, double beta) {
  if (beta <= 0.0) throw ValueError("total_variation: beta must be > 0");
  if (image.shape.size() != 3) {
    throw ShapeError("total_variation: expected [C,H,W], got " +
                     shape_str(image.shape));
  }
  const std::size_t C = image.shape[0], H = image.shape[1], W = image.shape[2];
  const double e = beta / 2.0;
  double total = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        double s = 0.0;
        if (x > 0) {
          const double d = image.at(c, y, x - 1) - image.at(c, y, x);
          s += d * d;
        }
        if (y + 1 < H) {
          const double d = image.at(c, y + 1, x) - image.at(c, y, x);
          s += d * d;
        }
        if (s == 0.0) continue;  // subgradient 0 at flat spots for beta < 2
        total += e == 1.0 ? s : std::pow(s, e);
      }
    }
  }
  return total;
}

// Gradient of total_variation; accumulates weight * dTV/dimage into grad.
inline void total_variation_grad(const Tensor& image, double beta, double weight,
                                 Tensor& grad) {
  check_same_shape(grad, image, "total_variation_grad");
  const std::size_t C = image.shape[0], H = image.shape[1], W = image.shape[2];
  const double e = beta / 2.0;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        double s = 0.0;
        double dh = 0.0, dv = 0.0;
        if (x > 0) {
          dh = image.at(c, y, x - 1) - image.at(c, y, x);
          s += dh * dh;
        }
        if (y + 1 < H) {
          dv = image.at(c, y + 1, x) - image.at(c, y, x);
          s += dv * dv;
        }
        if (s == 0.0) continue;
        const double f = weight * (e == 1.0 ? 1.0 : e * std::pow(s, e - 1.0));
        if (x > 0) {
          grad.at(c, y, x - 1) += f * 2.0 * dh;
          grad.at(c, y, x) -= f * 2.0 * dh;
        }
        if (y + 1 < H) {
          grad.at(c, y + 1, x) += f * 2.0 * dv;
          grad.at(c, y, x) -= f * 2.0 * dv;
        }
      }
    }
  }
}

}  // namespace pmt
