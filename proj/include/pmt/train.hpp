#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "pmt/loss.hpp"
#include "pmt/model.hpp"
#include "pmt/rng.hpp"

namespace pmt {

struct LabeledImage {
  Tensor image;
  std::size_t label;
};

struct TrainHyper {
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

struct TrainResult {
  Model model;
  std::vector<double> epoch_losses;  // mean sample loss per epoch
};

namespace detail {

// Shared mini-batch SGD with momentum. `sample_backward` runs forward+backward
// for one sample, accumulates parameter grads, and returns the sample loss.
template <typename SampleBackward>
TrainResult sgd_train(Model model, std::size_t n_samples, const TrainHyper& hyper,
                      SampleBackward&& sample_backward) {
  if (n_samples == 0) throw ValueError("training set is empty");
  std::vector<std::vector<Tensor>> velocity = zero_param_grads(model);
  TrainResult result;
  result.epoch_losses.reserve(hyper.epochs);

  std::vector<std::size_t> order(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    auto shuffle_stream = rng::stream(hyper.seed, rng::kTrainShuffle, epoch);
    shuffle_stream.shuffle(order);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n_samples; start += hyper.batch_size) {
      const std::size_t end = std::min(start + hyper.batch_size, n_samples);
      std::vector<std::vector<Tensor>> grads = zero_param_grads(model);
      double batch_loss = 0.0;
      for (std::size_t bi = start; bi < end; ++bi) {
        batch_loss += sample_backward(model, order[bi], grads);
      }
      epoch_loss += batch_loss;
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      for (std::size_t li = 0; li < model.num_layers(); ++li) {
        for (std::size_t pi = 0; pi < model.params[li].size(); ++pi) {
          Tensor& v = velocity[li][pi];
          Tensor& p = model.params[li][pi];
          const Tensor& g = grads[li][pi];
          for (std::size_t i = 0; i < p.size(); ++i) {
            v[i] = hyper.momentum * v[i] - hyper.learning_rate * inv_batch * g[i];
            p[i] += v[i];
          }
        }
      }
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(n_samples));
  }
  result.model = std::move(model);
  return result;
}

}  // namespace detail

// Softmax-cross-entropy training of a classifier (recognizer or attribute
// probe). The head stays on the returned model; embed() skips it.
inline TrainResult train_classifier(const ModelSpec& spec,
                                    const std::vector<LabeledImage>& data,
                                    const TrainHyper& hyper) {
  if (data.empty()) throw ValueError("train_classifier: empty dataset");
  if (spec.head_classes < 2) {
    throw ValueError("train_classifier: classifier head needs >= 2 classes");
  }
  for (const auto& s : data) {
    if (s.label >= spec.head_classes) {
      throw ValueError("label " + std::to_string(s.label) +
                       " out of range for head of " +
                       std::to_string(spec.head_classes));
    }
  }

  Model model = build_model(spec, hyper.seed);
  return detail::sgd_train(
      std::move(model), data.size(), hyper,
      [&](const Model& m, std::size_t idx, std::vector<std::vector<Tensor>>& grads) {
        Activations acts = model_forward_collect(m, data[idx].image);
        auto ce = softmax_cross_entropy(acts.back(), data[idx].label);
        Gradients g = model_backward(m, acts, ce.logit_grad);
        for (std::size_t li = 0; li < m.num_layers(); ++li) {
          for (std::size_t pi = 0; pi < grads[li].size(); ++pi) {
            add_inplace(grads[li][pi], g.param_grads[li][pi]);
          }
        }
        return ce.loss;
      });
}

inline TrainResult train_recognizer(const ModelSpec& spec,
                                    const std::vector<LabeledImage>& data,
                                    const TrainHyper& hyper) {
  return train_classifier(spec, data, hyper);
}

// Decoder regression on (feature, image) pairs with mean-per-pixel squared loss.
inline TrainResult train_decoder(const std::vector<std::pair<Tensor, Tensor>>& pairs,
                                 const ModelSpec& spec, const TrainHyper& hyper) {
  if (pairs.empty()) throw ValueError("train_decoder: empty pair list");
  for (const auto& [z, x] : pairs) {
    if (z.shape != spec.input_shape) {
      throw ShapeError("train_decoder: feature shape " + shape_str(z.shape) +
                       " does not match decoder input " +
                       shape_str(spec.input_shape));
    }
  }
  Model model = build_model(spec, hyper.seed);
  return detail::sgd_train(
      std::move(model), pairs.size(), hyper,
      [&](const Model& m, std::size_t idx, std::vector<std::vector<Tensor>>& grads) {
        const auto& [z, x] = pairs[idx];
        Activations acts = model_forward_collect(m, z);
        const Tensor& y = acts.back();
        check_same_shape(y, x, "decoder output vs image");
        const double inv_n = 1.0 / static_cast<double>(y.size());
        Tensor gy(y.shape);
        double loss = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
          const double d = y[i] - x[i];
          loss += d * d * inv_n;
          gy[i] = 2.0 * d * inv_n;
        }
        Gradients g = model_backward(m, acts, gy);
        for (std::size_t li = 0; li < m.num_layers(); ++li) {
          for (std::size_t pi = 0; pi < grads[li].size(); ++pi) {
            add_inplace(grads[li][pi], g.param_grads[li][pi]);
          }
        }
        return loss;
      });
}

}  // namespace pmt
