#pragma once

#include "pmt/model.hpp"

namespace pmt {

// Layer indices of the default recognizer:
//   0..2  Conv(3->w1,k3,p1) ReLU AvgPool2
//   3..5  Conv(w1->w2,k3,p1) ReLU AvgPool2
//   6..8  Conv(w2->w3,k3,p1) ReLU AvgPool2
//   9     Flatten
//   10    Linear(w3*16 -> embedding)
//   11    L2Normalize
//   12    head Linear(embedding -> n_ids), optional
inline ModelSpec recognizer_spec(std::size_t w1, std::size_t w2, std::size_t w3,
                                 std::size_t embedding, std::size_t n_ids) {
  ModelSpec spec;
  spec.input_shape = {3, 32, 32};
  spec.embedding_dim = embedding;
  spec.head_classes = n_ids;
  spec.layers = {
      LayerSpec::conv2d(3, w1, 3, 1, 1),  LayerSpec::relu(),
      LayerSpec::avg_pool2d(2),           LayerSpec::conv2d(w1, w2, 3, 1, 1),
      LayerSpec::relu(),                  LayerSpec::avg_pool2d(2),
      LayerSpec::conv2d(w2, w3, 3, 1, 1), LayerSpec::relu(),
      LayerSpec::avg_pool2d(2),           LayerSpec::flatten(),
      LayerSpec::linear(w3 * 16, embedding),
      LayerSpec::l2_normalize(),
  };
  if (n_ids > 0) spec.layers.push_back(LayerSpec::linear(embedding, n_ids));
  return spec;
}

// n_ids == 0 drops the classifier head (embedding-only model).
inline ModelSpec default_recognizer_spec(std::size_t n_ids) {
  return recognizer_spec(16, 32, 64, 64, n_ids);
}

// Architecturally different stack for the unauthorized-model experiments:
// same vocabulary, slimmer widths, smaller embedding.
inline ModelSpec slim_recognizer_spec(std::size_t n_ids) {
  return recognizer_spec(8, 24, 48, 32, n_ids);
}

// Shallow/server boundary: end of the second conv block.
inline constexpr std::size_t kDefaultSplit = 6;

// Post-pool activations of the two shallow conv blocks.
inline const std::vector<std::size_t> kDefaultAggregateLayers{2, 5};

// Layers of the fixed perceptual probe: first conv output plus the two
// shallow pool outputs. Earlier taps keep the probe sensitive to the fine
// spatial structure that obfuscation destroys.
inline const std::vector<std::size_t> kProbeLayers{0, 2, 5};

// The probe pools to 16x16 (2 px cells at the first layer); coarser pooling
// cannot tell an obfuscated image from its original because PMT preserves
// the coarse brightness layout.
inline constexpr std::size_t kProbePool = 16;

inline constexpr std::uint64_t kProbeSeed = 7777;

// Maps the default shallow feature map [32,8,8] back to a 3x32x32 image.
inline ModelSpec default_decoder_spec() {
  ModelSpec spec;
  spec.input_shape = {32, 8, 8};
  spec.layers = {
      LayerSpec::conv2d(32, 32, 3, 1, 1), LayerSpec::relu(),
      LayerSpec::upsample_nearest_2x(),   LayerSpec::conv2d(32, 16, 3, 1, 1),
      LayerSpec::relu(),                  LayerSpec::upsample_nearest_2x(),
      LayerSpec::conv2d(16, 3, 3, 1, 1),  LayerSpec::sigmoid(),
  };
  return spec;
}

inline ModelSpec attribute_probe_spec() { return default_recognizer_spec(2); }

}  // namespace pmt
