#pragma once

#include <cstdint>
#include <vector>

#include "pmt/archs.hpp"
#include "pmt/loss.hpp"
#include "pmt/model.hpp"
#include "pmt/rng.hpp"
#include "pmt/train.hpp"
#include "pmt/tv.hpp"

namespace pmt {

struct AttackConfig {
  std::size_t iterations = 500;
  double step = 1.0 / 255.0;
  double tv_weight = 1e-2;
  double tv_beta = 2.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (iterations < 1) throw ValueError("attack: iterations must be >= 1");
    if (step <= 0.0) throw ValueError("attack: step must be > 0");
    if (tv_weight < 0.0) throw ValueError("attack: tv_weight must be >= 0");
    if (tv_beta <= 0.0) throw ValueError("attack: tv_beta must be > 0");
  }
};

// Level-2 (white-box) reconstruction: projected sign-gradient descent on
// ||E_c(x_hat) - z||_2 + tv_weight * TV(x_hat) from a uniform random start.
inline Tensor whitebox_reconstruct(const Tensor& z, const Model& shallow,
                                   const AttackConfig& cfg) {
  cfg.validate();
  const Shape out_shape = shallow.spec.activation_shapes().back();
  if (z.shape != out_shape) {
    throw ShapeError("whitebox_reconstruct: feature shape " + shape_str(z.shape) +
                     " does not match shallow output " + shape_str(out_shape));
  }
  Tensor x_hat(shallow.spec.input_shape);
  auto s = rng::stream(cfg.seed, rng::kAttackInit);
  for (double& v : x_hat.values) v = s.next_unit();

  const LossSpec loss = LossSpec::feature_l2_plus_tv(z, cfg.tv_weight, cfg.tv_beta);
  for (std::size_t i = 0; i < cfg.iterations; ++i) {
    Gradients g = loss_gradients(shallow, x_hat, loss);
    for (std::size_t j = 0; j < x_hat.size(); ++j) {
      const double d = g.input_grad[j];
      x_hat[j] -= cfg.step * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
    }
    clamp01_inplace(x_hat);
  }
  return x_hat;
}

// Level-1 (black-box) reconstruction: one decoder forward pass.
inline Tensor modelbased_reconstruct(const Model& decoder, const Tensor& z) {
  if (z.shape != decoder.spec.input_shape) {
    throw ShapeError("modelbased_reconstruct: feature shape " + shape_str(z.shape) +
                     " does not match decoder input " +
                     shape_str(decoder.spec.input_shape));
  }
  return model_forward(decoder, z);
}

// 2-class probe over the synthetic attribute tag.
inline TrainResult train_attribute_probe(const std::vector<LabeledImage>& data,
                                         const TrainHyper& hyper,
                                         const ModelSpec& spec = attribute_probe_spec()) {
  bool seen[2] = {false, false};
  for (const auto& s : data) {
    if (s.label < 2) seen[s.label] = true;
  }
  if (!data.empty() && (!seen[0] || !seen[1])) {
    throw ValueError("train_attribute_probe: single-class dataset");
  }
  return train_classifier(spec, data, hyper);
}

// Probability vector over attribute classes (softmax of the head logits).
inline Tensor attribute_estimate(const Model& probe, const Tensor& image) {
  Tensor logits = model_forward(probe, image);
  const double m = *std::max_element(logits.values.begin(), logits.values.end());
  double z = 0.0;
  for (double v : logits.values) z += std::exp(v - m);
  Tensor p(logits.shape);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m) / z;
  }
  return p;
}

}  // namespace pmt
