#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pmt {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct ValueError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

// Dense row-major 64-bit float tensor. The single numeric carrier for
// images, feature maps, parameters and gradients.
struct Tensor {
  Shape shape;
  std::vector<double> values;

  Tensor() = default;
  Tensor(Shape s, double fill = 0.0)
      : shape(std::move(s)), values(shape_numel(shape), fill) {}
  Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
    if (values.size() != shape_numel(shape)) {
      throw ShapeError("tensor value count " + std::to_string(values.size()) +
                       " does not match shape " + shape_str(shape));
    }
  }

  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  std::size_t size() const { return values.size(); }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  // [C,H,W] addressing
  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return values[(c * shape[1] + y) * shape[2] + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return values[(c * shape[1] + y) * shape[2] + x];
  }

  Tensor reshaped(Shape s) const {
    if (shape_numel(s) != size()) {
      throw ShapeError("cannot reshape " + shape_str(shape) + " to " + shape_str(s));
    }
    return Tensor(std::move(s), values);
  }

  bool all_finite() const {
    for (double v : values) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape) +
                     " vs " + shape_str(b.shape));
  }
}

inline double dot(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l1_norm(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values) s += std::abs(v);
  return s;
}

inline double l2_norm(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values) s += v * v;
  return std::sqrt(s);
}

inline Tensor& add_inplace(Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

inline Tensor& scale_inplace(Tensor& a, double k) {
  for (double& v : a.values) v *= k;
  return a;
}

inline Tensor& axpy_inplace(Tensor& a, double k, const Tensor& b) {
  check_same_shape(a, b, "axpy");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += k * b[i];
  return a;
}

inline Tensor& clamp01_inplace(Tensor& a) {
  for (double& v : a.values) v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  return a;
}

inline Tensor sign(const Tensor& a) {
  Tensor out(a.shape);
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = a[i] > 0.0 ? 1.0 : (a[i] < 0.0 ? -1.0 : 0.0);
  }
  return out;
}

inline bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.shape == b.shape && a.values == b.values;
}

}  // namespace pmt
