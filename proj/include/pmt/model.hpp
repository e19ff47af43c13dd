#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pmt/layers.hpp"
#include "pmt/tensor.hpp"

namespace pmt {

// Ordered layer stack with a [C,H,W] input contract. When `head_classes` is
// nonzero the final layer must be the classifier Linear; the embedding path
// stops just before it.
struct ModelSpec {
  std::vector<LayerSpec> layers;
  Shape input_shape;  // [C,H,W]
  std::size_t embedding_dim = 0;
  std::size_t head_classes = 0;

  std::size_t embedding_layer_count() const {
    return head_classes > 0 ? layers.size() - 1 : layers.size();
  }

  // Chains shape arithmetic through the stack; throws on any inconsistency.
  std::vector<Shape> activation_shapes() const {
    if (layers.empty() && input_shape.empty()) {
      throw ValueError("model spec has no layers and no input shape");
    }
    std::vector<Shape> shapes{input_shape};
    for (std::size_t i = 0; i < layers.size(); ++i) {
      layers[i].validate(i);
      shapes.push_back(layer_output_shape(layers[i], shapes.back(), i));
    }
    return shapes;
  }

  void validate() const {
    auto shapes = activation_shapes();
    if (head_classes > 0) {
      if (layers.empty() || layers.back().kind != LayerKind::Linear ||
          layers.back().out_dim != head_classes) {
        throw ValueError("classifier head must be a final Linear with out_dim == head_classes");
      }
      if (embedding_dim > 0 && layers.back().in_dim != embedding_dim) {
        throw ValueError("head Linear in_dim does not match embedding_dim");
      }
    }
    if (embedding_dim > 0) {
      const Shape& emb = shapes[embedding_layer_count()];
      if (emb.size() != 1 || emb[0] != embedding_dim) {
        throw ValueError("embedding output shape " + shape_str(emb) +
                         " does not match embedding_dim " +
                         std::to_string(embedding_dim));
      }
    }
  }
};

struct Model {
  ModelSpec spec;
  std::vector<std::vector<Tensor>> params;  // one list per layer
  std::uint64_t seed = 0;

  std::size_t num_layers() const { return spec.layers.size(); }
};

inline Model build_model(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  Model m{spec, {}, seed};
  m.params.reserve(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    m.params.push_back(init_layer_params(spec.layers[i], seed, i));
  }
  return m;
}

inline std::size_t param_count(const Model& m) {
  std::size_t n = 0;
  for (const auto& layer : m.params) {
    for (const auto& t : layer) n += t.size();
  }
  return n;
}

// One tensor per layer output, index 0 = input.
using Activations = std::vector<Tensor>;

// Forward pass keeping every intermediate; `layer_limit` truncates the stack
// (used for embeddings and shallow splits).
inline Activations model_forward_collect(const Model& m, const Tensor& input,
                                         std::size_t layer_limit = SIZE_MAX) {
  const std::size_t n = std::min(layer_limit, m.num_layers());
  Activations acts;
  acts.reserve(n + 1);
  acts.push_back(input);
  for (std::size_t i = 0; i < n; ++i) {
    acts.push_back(layer_forward(m.spec.layers[i], m.params[i], acts.back(), i));
  }
  return acts;
}

// Fused forward (no intermediates). Same per-layer arithmetic as
// model_forward_collect, so the results are bit-identical.
inline Tensor model_forward(const Model& m, const Tensor& input,
                            std::size_t layer_limit = SIZE_MAX) {
  const std::size_t n = std::min(layer_limit, m.num_layers());
  Tensor cur = input;
  for (std::size_t i = 0; i < n; ++i) {
    cur = layer_forward(m.spec.layers[i], m.params[i], cur, i);
  }
  return cur;
}

struct Gradients {
  Tensor input_grad;
  std::vector<std::vector<Tensor>> param_grads;
};

inline std::vector<std::vector<Tensor>> zero_param_grads(const Model& m) {
  std::vector<std::vector<Tensor>> g(m.num_layers());
  for (std::size_t i = 0; i < m.num_layers(); ++i) {
    for (const Tensor& p : m.params[i]) g[i].emplace_back(p.shape);
  }
  return g;
}

// Reverse pass with gradients injected at arbitrary activations.
// `activation_grads[i]`, when non-empty, is dJ/d(acts[i]); acts must come
// from model_forward_collect on the same model.
inline Gradients model_backward_multi(
    const Model& m, const Activations& acts,
    const std::vector<Tensor>& activation_grads) {
  const std::size_t n = acts.size() - 1;
  if (n > m.num_layers()) {
    throw ShapeError("activations/model mismatch: " + std::to_string(n) +
                     " layer outputs vs " + std::to_string(m.num_layers()) +
                     " layers");
  }
  if (activation_grads.size() != acts.size()) {
    throw ShapeError("expected one (possibly empty) grad slot per activation");
  }
  for (std::size_t i = 0; i <= n; ++i) {
    if (activation_grads[i].size() != 0) {
      check_same_shape(activation_grads[i], acts[i], "activation grad");
    }
  }

  Gradients g;
  g.param_grads.assign(m.num_layers(), {});
  Tensor cur(acts[n].shape);
  if (activation_grads[n].size() != 0) cur = activation_grads[n];

  for (std::size_t li = n; li-- > 0;) {
    Tensor gx(acts[li].shape);
    std::vector<Tensor> gp;
    for (const Tensor& p : m.params[li]) gp.emplace_back(p.shape);
    layer_backward(m.spec.layers[li], m.params[li], acts[li], acts[li + 1], cur,
                   gx, gp, li);
    g.param_grads[li] = std::move(gp);
    if (activation_grads[li].size() != 0) add_inplace(gx, activation_grads[li]);
    cur = std::move(gx);
  }
  g.input_grad = std::move(cur);
  return g;
}

// Exact reverse-mode gradients of the scalar whose output-gradient is given.
inline Gradients model_backward(const Model& m, const Activations& acts,
                                const Tensor& output_grad) {
  std::vector<Tensor> slots(acts.size());
  slots.back() = output_grad;
  return model_backward_multi(m, acts, slots);
}

// Embedding: forward through all layers except the classifier head.
inline Tensor embed(const Model& m, const Tensor& image) {
  if (image.shape != m.spec.input_shape) {
    throw ShapeError("embed: image shape " + shape_str(image.shape) +
                     " does not match model input " +
                     shape_str(m.spec.input_shape));
  }
  return model_forward(m, image, m.spec.embedding_layer_count());
}

// Front layers [0,s) of a model; the server keeps [s,end). Composition is
// bit-identical to the full forward because both run the same layer code.
struct SplitModel {
  Model model;
  std::size_t split;

  Model shallow() const {
    Model s;
    s.seed = model.seed;
    s.spec.input_shape = model.spec.input_shape;
    s.spec.layers.assign(model.spec.layers.begin(),
                         model.spec.layers.begin() + split);
    s.params.assign(model.params.begin(), model.params.begin() + split);
    return s;
  }

  Model server() const {
    Model s;
    s.seed = model.seed;
    auto shapes = model.spec.activation_shapes();
    s.spec.input_shape = shapes[split];
    s.spec.layers.assign(model.spec.layers.begin() + split,
                         model.spec.layers.end());
    s.spec.head_classes = model.spec.head_classes;
    s.spec.embedding_dim = model.spec.embedding_dim;
    s.params.assign(model.params.begin() + split, model.params.end());
    return s;
  }
};

inline SplitModel split_model(const Model& m, std::size_t s) {
  if (s == 0 || s >= m.num_layers()) {
    throw ValueError("split index " + std::to_string(s) + " out of range (0, " +
                     std::to_string(m.num_layers()) + ")");
  }
  return SplitModel{m, s};
}

}  // namespace pmt
