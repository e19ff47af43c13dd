#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmt/archs.hpp"
#include "pmt/attacks.hpp"
#include "pmt/pmt.hpp"
#include "pmt/serialize.hpp"
#include "pmt/train.hpp"

namespace pmt {

struct ConfigError : Error {
  using Error::Error;
};
struct UnknownExperimentError : Error {
  using Error::Error;
};

inline ModelSpec spec_by_name(const std::string& arch, std::size_t n_ids) {
  if (arch == "default") return default_recognizer_spec(n_ids);
  if (arch == "slim") return slim_recognizer_spec(n_ids);
  throw ConfigError("unknown arch \"" + arch + "\" (default|slim)");
}

struct ModelRef {
  std::string arch = "default";
  std::uint64_t seed = 1;
};

struct DatasetConfig {
  std::size_t identities = 16;
  std::size_t renders_per_id = 20;
  std::size_t pair_count = 100;
  std::size_t eval_renders = 10;  // held-out variations used for pairs
  std::uint64_t base_seed = 0;
};

struct ExperimentConfig {
  std::string experiment;
  std::string out_dir = "out";
  std::uint64_t master_seed = 0;
  std::size_t workers = 4;
  std::size_t eval_images = 50;
  std::size_t grid_pairs = 40;  // pair budget for the sweep experiments

  DatasetConfig dataset;
  TrainHyper train;
  std::vector<ModelRef> authorized{{"default", 1}};
  std::vector<ModelRef> unauthorized{{"slim", 2}, {"default", 3}};

  PmtConfig pmt;
  AttackConfig attack;

  double up_sigma = 0.1;
  double up_kappa = 0.5;
  std::size_t up_trials = 8;

  TrainHyper decoder_train{0.1, 0.9, 20, 16, 0};
  std::size_t decoder_aux_identities = 16;
  std::size_t decoder_aux_renders = 10;
  std::uint64_t decoder_aux_base_seed = 1000;

  void validate() const {
    if (dataset.identities < 2) throw ConfigError("dataset.identities must be >= 2");
    if (dataset.pair_count < 2 || dataset.pair_count % 2 != 0) {
      throw ConfigError("dataset.pair_count must be even and >= 2");
    }
    if (authorized.empty()) throw ConfigError("need at least one authorized model");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    try {
      pmt.validate();
      attack.validate();
    } catch (const ValueError& e) {
      throw ConfigError(e.what());
    }
  }
};

// ---------------------------------------------------------------------------
// JSON parsing (single document; absent keys keep their defaults)

namespace detail {

using nlohmann::json;

inline InitMode parse_init(const std::string& s) {
  if (s == "gaussian_noise") return InitMode::GaussianNoise;
  if (s == "random_permute") return InitMode::RandomPermute;
  if (s == "gaussian_blur") return InitMode::GaussianBlur;
  if (s == "copy_original") return InitMode::CopyOriginal;
  throw ConfigError("unknown init mode \"" + s + "\"");
}

inline std::string init_name(InitMode m) {
  switch (m) {
    case InitMode::GaussianNoise: return "gaussian_noise";
    case InitMode::RandomPermute: return "random_permute";
    case InitMode::GaussianBlur: return "gaussian_blur";
    case InitMode::CopyOriginal: return "copy_original";
  }
  return "?";
}

inline AugmentMode parse_augment(const json& j) {
  AugmentMode m;
  const std::string kind = j.value("mode", "random_noise");
  if (kind == "none") {
    m.kind = AugmentMode::Kind::None;
  } else if (kind == "random_noise") {
    m.kind = AugmentMode::Kind::RandomNoise;
  } else if (kind == "random_affine") {
    m.kind = AugmentMode::Kind::RandomAffine;
  } else if (kind == "mix") {
    m.kind = AugmentMode::Kind::Mix;
  } else {
    throw ConfigError("unknown augment mode \"" + kind + "\"");
  }
  m.sigma = j.value("sigma", m.sigma);
  m.max_rot_deg = j.value("max_rot_deg", m.max_rot_deg);
  m.max_trans_px = j.value("max_trans_px", m.max_trans_px);
  m.scale_lo = j.value("scale_lo", m.scale_lo);
  m.scale_hi = j.value("scale_hi", m.scale_hi);
  return m;
}

inline KernelSpec parse_kernel(const json& j) {
  const std::string kind = j.value("type", "gaussian");
  const std::size_t k = j.value("k", std::size_t{1});
  if (kind == "none") return KernelSpec::none();
  if (kind == "linear") return KernelSpec::linear(k);
  if (kind == "gaussian") return KernelSpec::gaussian(k);
  throw ConfigError("unknown kernel type \"" + kind + "\"");
}

inline TrainHyper parse_train(const json& j, TrainHyper base) {
  base.learning_rate = j.value("learning_rate", base.learning_rate);
  base.momentum = j.value("momentum", base.momentum);
  base.epochs = j.value("epochs", base.epochs);
  base.batch_size = j.value("batch_size", base.batch_size);
  base.seed = j.value("seed", base.seed);
  return base;
}

inline std::vector<ModelRef> parse_models(const json& j) {
  std::vector<ModelRef> out;
  for (const auto& m : j) {
    out.push_back({m.value("arch", "default"), m.value("seed", std::uint64_t{1})});
  }
  return out;
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  c.experiment = j.value("experiment", c.experiment);
  c.out_dir = j.value("out_dir", c.out_dir);
  c.master_seed = j.value("master_seed", c.master_seed);
  c.workers = j.value("workers", c.workers);
  c.eval_images = j.value("eval_images", c.eval_images);
  c.grid_pairs = j.value("grid_pairs", c.grid_pairs);

  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    c.dataset.identities = d.value("identities", c.dataset.identities);
    c.dataset.renders_per_id = d.value("renders_per_id", c.dataset.renders_per_id);
    c.dataset.pair_count = d.value("pair_count", c.dataset.pair_count);
    c.dataset.eval_renders = d.value("eval_renders", c.dataset.eval_renders);
    c.dataset.base_seed = d.value("base_seed", c.dataset.base_seed);
  }
  if (j.contains("train")) c.train = detail::parse_train(j.at("train"), c.train);
  if (j.contains("models")) {
    const auto& m = j.at("models");
    if (m.contains("authorized")) c.authorized = detail::parse_models(m.at("authorized"));
    if (m.contains("unauthorized")) {
      c.unauthorized = detail::parse_models(m.at("unauthorized"));
    }
  }
  if (j.contains("pmt")) {
    const auto& p = j.at("pmt");
    if (p.contains("init")) c.pmt.init = detail::parse_init(p.at("init"));
    c.pmt.iterations = p.value("iterations", c.pmt.iterations);
    c.pmt.step = p.value("step", c.pmt.step);
    if (p.contains("augment")) c.pmt.augment = detail::parse_augment(p.at("augment"));
    if (p.contains("aggregate_layers")) {
      c.pmt.aggregate_layers =
          p.at("aggregate_layers").get<std::vector<std::size_t>>();
    }
    if (p.contains("kernel")) c.pmt.kernel = detail::parse_kernel(p.at("kernel"));
    c.pmt.clamp_output = p.value("clamp_output", c.pmt.clamp_output);
    c.pmt.sign_update = p.value("sign_update", c.pmt.sign_update);
  }
  if (j.contains("attack")) {
    const auto& a = j.at("attack");
    c.attack.iterations = a.value("iterations", c.attack.iterations);
    c.attack.step = a.value("step", c.attack.step);
    c.attack.tv_weight = a.value("tv_weight", c.attack.tv_weight);
    c.attack.tv_beta = a.value("tv_beta", c.attack.tv_beta);
  }
  if (j.contains("up")) {
    const auto& u = j.at("up");
    c.up_sigma = u.value("sigma", c.up_sigma);
    c.up_kappa = u.value("kappa", c.up_kappa);
    c.up_trials = u.value("trials", c.up_trials);
  }
  if (j.contains("decoder")) {
    const auto& d = j.at("decoder");
    if (d.contains("train")) {
      c.decoder_train = detail::parse_train(d.at("train"), c.decoder_train);
    }
    c.decoder_aux_identities = d.value("aux_identities", c.decoder_aux_identities);
    c.decoder_aux_renders = d.value("aux_renders", c.decoder_aux_renders);
    c.decoder_aux_base_seed = d.value("aux_base_seed", c.decoder_aux_base_seed);
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  Bytes raw = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(raw.begin(), raw.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config error: ") + e.what());
  }
}

}  // namespace pmt
