#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include "pmt/model.hpp"
#include "pmt/tensor.hpp"
#include "pmt/tv.hpp"

namespace pmt {

struct CrossEntropyResult {
  double loss;
  Tensor logit_grad;
};

// Numerically stabilized softmax cross entropy over rank-1 logits.
inline CrossEntropyResult softmax_cross_entropy(const Tensor& logits,
                                                std::size_t label) {
  if (logits.shape.size() != 1) {
    throw ShapeError("softmax_cross_entropy: logits must be rank-1, got " +
                     shape_str(logits.shape));
  }
  if (label >= logits.size()) {
    throw ValueError("softmax_cross_entropy: label " + std::to_string(label) +
                     " out of range for " + std::to_string(logits.size()) +
                     " classes");
  }
  const double m = *std::max_element(logits.values.begin(), logits.values.end());
  double z = 0.0;
  for (double v : logits.values) z += std::exp(v - m);
  CrossEntropyResult r{-(logits[label] - m - std::log(z)), Tensor(logits.shape)};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    r.logit_grad[i] = std::exp(logits[i] - m) / z - (i == label ? 1.0 : 0.0);
  }
  return r;
}

// Scalar objectives the gradient checker can probe. FeatureL2PlusTv is the
// reconstruction-attack objective: ||f(x) - target||_2 + tv_weight * TV(x).
struct LossSpec {
  enum class Kind { FeatureDistance, FeatureL2PlusTv, CrossEntropy } kind;
  Tensor target;
  double tv_weight = 0.0;
  double tv_beta = 2.0;
  std::size_t label = 0;

  static LossSpec feature_distance(Tensor target) {
    return {Kind::FeatureDistance, std::move(target), 0.0, 2.0, 0};
  }
  static LossSpec feature_l2_plus_tv(Tensor target, double weight, double beta) {
    return {Kind::FeatureL2PlusTv, std::move(target), weight, beta, 0};
  }
  static LossSpec cross_entropy(std::size_t label) {
    return {Kind::CrossEntropy, {}, 0.0, 2.0, label};
  }
};

struct LossEval {
  double loss;
  Tensor output_grad;       // dJ/d(model output)
  Tensor extra_input_grad;  // direct dJ/d(input) term (TV); empty if none
};

inline LossEval eval_loss(const LossSpec& spec, const Tensor& output,
                          const Tensor& input) {
  switch (spec.kind) {
    case LossSpec::Kind::FeatureDistance: {
      check_same_shape(output, spec.target, "feature-distance target");
      double loss = 0.0;
      Tensor g(output.shape);
      for (std::size_t i = 0; i < output.size(); ++i) {
        const double d = output[i] - spec.target[i];
        loss += d * d;
        g[i] = 2.0 * d;
      }
      return {loss, std::move(g), {}};
    }
    case LossSpec::Kind::FeatureL2PlusTv: {
      check_same_shape(output, spec.target, "feature target");
      double sq = 0.0;
      for (std::size_t i = 0; i < output.size(); ++i) {
        const double d = output[i] - spec.target[i];
        sq += d * d;
      }
      const double n = std::sqrt(sq);
      Tensor g(output.shape);
      if (n >= 1e-15) {
        for (std::size_t i = 0; i < output.size(); ++i) {
          g[i] = (output[i] - spec.target[i]) / n;
        }
      }
      double loss = n;
      Tensor gin;
      if (spec.tv_weight != 0.0) {
        loss += spec.tv_weight * total_variation(input, spec.tv_beta);
        gin = Tensor(input.shape);
        total_variation_grad(input, spec.tv_beta, spec.tv_weight, gin);
      }
      return {loss, std::move(g), std::move(gin)};
    }
    case LossSpec::Kind::CrossEntropy: {
      auto ce = softmax_cross_entropy(output, spec.label);
      return {ce.loss, std::move(ce.logit_grad), {}};
    }
  }
  throw ValueError("unknown loss kind");
}

inline double scalar_loss(const Model& m, const Tensor& input, const LossSpec& spec) {
  return eval_loss(spec, model_forward(m, input), input).loss;
}

// Analytic gradients of the scalar objective w.r.t. input and parameters.
inline Gradients loss_gradients(const Model& m, const Tensor& input,
                                const LossSpec& spec) {
  Activations acts = model_forward_collect(m, input);
  LossEval ev = eval_loss(spec, acts.back(), input);
  Gradients g = model_backward(m, acts, ev.output_grad);
  if (ev.extra_input_grad.size() != 0) {
    add_inplace(g.input_grad, ev.extra_input_grad);
  }
  return g;
}

namespace detail {

inline double rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max(1e-12, std::abs(analytic) + std::abs(numeric));
}

}  // namespace detail

// Central-difference check of every input and parameter coordinate; returns
// the max relative error. This is the verification oracle for all
// gradient-based operations in the project.
inline double grad_check(const Model& model, const Tensor& input,
                         const LossSpec& spec, double h = 1e-5) {
  if (h <= 0.0) throw ValueError("grad_check: h must be > 0");
  Gradients g = loss_gradients(model, input, spec);

  double worst = 0.0;
  Tensor x = input;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double lp = scalar_loss(model, x, spec);
    x[i] = keep - h;
    const double lm = scalar_loss(model, x, spec);
    x[i] = keep;
    worst = std::max(worst, detail::rel_err(g.input_grad[i], (lp - lm) / (2.0 * h)));
  }

  Model m = model;
  for (std::size_t li = 0; li < m.num_layers(); ++li) {
    for (std::size_t pi = 0; pi < m.params[li].size(); ++pi) {
      Tensor& p = m.params[li][pi];
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double keep = p[i];
        p[i] = keep + h;
        const double lp = scalar_loss(m, input, spec);
        p[i] = keep - h;
        const double lm = scalar_loss(m, input, spec);
        p[i] = keep;
        worst = std::max(
            worst, detail::rel_err(g.param_grads[li][pi][i], (lp - lm) / (2.0 * h)));
      }
    }
  }
  return worst;
}

}  // namespace pmt
