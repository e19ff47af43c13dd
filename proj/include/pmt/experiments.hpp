#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pmt/config.hpp"
#include "pmt/datagen.hpp"
#include "pmt/metrics.hpp"
#include "pmt/parallel.hpp"
#include "pmt/ppm.hpp"
#include "pmt/report.hpp"

namespace pmt {

struct ExperimentResult {
  std::vector<MetricReport> reports;
  std::vector<std::string> artifacts;  // files written under out_dir
};

namespace exp_detail {

// Per-job seed streams. Values are part of the deterministic-output contract:
// changing them changes every derived obfuscation.
enum JobStream : std::uint64_t {
  kPairProtect = 1,
  kEvalProtect = 2,
  kNoiseBaseline = 3,
  kWhitebox = 4,
  kUp = 5,
  kDecoder = 6,
};

inline std::uint64_t job_seed(const ExperimentConfig& cfg, std::uint64_t stream,
                              std::uint64_t variant, std::size_t index) {
  return rng::hash3(cfg.master_seed,
                    rng::hash2(static_cast<std::uint64_t>(rng::kExperiment), stream),
                    rng::hash2(variant, index));
}

struct Workbench {
  FaceDataset train_set;
  std::vector<VerificationPair> pairs;      // held-out renders
  std::vector<Tensor> eval_images;          // disjoint from pair renders
  std::vector<Model> authorized;
  std::vector<Model> unauthorized;

  const Model& auth() const { return authorized.front(); }
  Model auth_shallow() const {
    return split_model(authorized.front(), kDefaultSplit).shallow();
  }
};

inline Model train_ref(const ExperimentConfig& cfg, const ModelRef& ref,
                       const FaceDataset& data) {
  TrainHyper hyper = cfg.train;
  hyper.seed = ref.seed;
  return train_recognizer(spec_by_name(ref.arch, cfg.dataset.identities),
                          data.images, hyper)
      .model;
}

inline Workbench make_workbench(const ExperimentConfig& cfg,
                                bool with_unauthorized = true) {
  Workbench wb;
  wb.train_set = make_dataset(cfg.dataset.identities, cfg.dataset.renders_per_id,
                              cfg.dataset.base_seed);
  wb.pairs = make_pairs(wb.train_set.identity_seeds, cfg.dataset.eval_renders,
                        cfg.dataset.pair_count, cfg.master_seed,
                        cfg.dataset.renders_per_id);
  const std::size_t eval_base =
      cfg.dataset.renders_per_id + cfg.dataset.eval_renders;
  for (std::size_t i = 0; i < cfg.eval_images; ++i) {
    const std::uint64_t id =
        wb.train_set.identity_seeds[i % cfg.dataset.identities];
    wb.eval_images.push_back(
        render_indexed(id, eval_base + i / cfg.dataset.identities));
  }

  std::vector<ModelRef> refs = cfg.authorized;
  const std::size_t n_auth = refs.size();
  if (with_unauthorized) {
    refs.insert(refs.end(), cfg.unauthorized.begin(), cfg.unauthorized.end());
  }
  std::vector<Model> models(refs.size());
  parallel_for(
      refs.size(),
      [&](std::size_t i) { models[i] = train_ref(cfg, refs[i], wb.train_set); },
      cfg.workers);
  for (std::size_t i = 0; i < models.size(); ++i) {
    (i < n_auth ? wb.authorized : wb.unauthorized).push_back(std::move(models[i]));
  }
  return wb;
}

// Obfuscate the first image of every pair; deterministic per pair index.
inline std::vector<Tensor> protect_pair_firsts(const ExperimentConfig& cfg,
                                               const PmtConfig& pmt_cfg,
                                               const Model& shallow,
                                               const std::vector<VerificationPair>& pairs,
                                               std::uint64_t variant) {
  std::vector<Tensor> out(pairs.size());
  parallel_for(
      pairs.size(),
      [&](std::size_t i) {
        PmtConfig local = pmt_cfg;
        local.master_seed = job_seed(cfg, kPairProtect, variant, i);
        out[i] = pmt_protect(pairs[i].image1, shallow, local).image;
      },
      cfg.workers);
  return out;
}

inline std::vector<Obfuscation> protect_images(const ExperimentConfig& cfg,
                                               const PmtConfig& pmt_cfg,
                                               const Model& shallow,
                                               const std::vector<Tensor>& images,
                                               std::uint64_t variant) {
  std::vector<Obfuscation> out(images.size());
  parallel_for(
      images.size(),
      [&](std::size_t i) {
        PmtConfig local = pmt_cfg;
        local.master_seed = job_seed(cfg, kEvalProtect, variant, i);
        out[i] = pmt_protect(images[i], shallow, local);
      },
      cfg.workers);
  return out;
}

inline ProtectFn lookup_protect(const std::vector<Tensor>& protecteds) {
  return [&protecteds](const Tensor&, std::size_t i) { return protecteds.at(i); };
}

inline double mean_ssim(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += ssim(a[i], b[i]);
  return s / static_cast<double>(a.size());
}

inline std::vector<VerificationPair> pair_budget(const std::vector<VerificationPair>& pairs,
                                                 std::size_t budget) {
  // keep the positive/negative balance: pairs are positives then negatives
  if (budget >= pairs.size() || budget < 2) return pairs;
  const std::size_t half = budget / 2;
  std::vector<VerificationPair> out;
  const std::size_t m = pairs.size() / 2;
  for (std::size_t i = 0; i < half; ++i) out.push_back(pairs[i]);
  for (std::size_t i = 0; i < half; ++i) out.push_back(pairs[m + i]);
  return out;
}

inline UpParams up_params(const ExperimentConfig& cfg, double sigma,
                          std::uint64_t variant) {
  UpParams p = default_up_params(sigma, cfg.up_kappa, cfg.up_trials,
                                 job_seed(cfg, kUp, variant, 0));
  p.workers = cfg.workers;
  return p;
}

inline std::string save_artifact(const ExperimentConfig& cfg,
                                 const std::string& name, const Tensor& image,
                                 std::vector<std::string>& artifacts) {
  const auto path = std::filesystem::path(cfg.out_dir) / name;
  save_ppm(path.string(), image);
  artifacts.push_back(path.string());
  return path.string();
}

// accuracy rows for one protected-pair set over several evaluated models
inline void accuracy_rows(const ExperimentConfig& cfg, const Workbench& wb,
                          const std::string& exp, const std::string& case_prefix,
                          const std::vector<VerificationPair>& pairs,
                          const std::vector<Tensor>& protecteds,
                          std::vector<MetricReport>& reports,
                          MetricReport* authorized_row_out = nullptr) {
  auto protect = lookup_protect(protecteds);
  MetricReport auth_row{exp, case_prefix + "/authorized"};
  auth_row.n_pairs = pairs.size();
  auth_row.values["acc"] =
      verification_accuracy(wb.auth(), protect, pairs, 0.2);
  std::vector<Tensor> firsts;
  for (const auto& p : pairs) firsts.push_back(p.image1);
  auth_row.values["ssim"] = mean_ssim(protecteds, firsts);
  if (authorized_row_out) {
    *authorized_row_out = auth_row;
  } else {
    reports.push_back(auth_row);
  }
  for (std::size_t u = 0; u < wb.unauthorized.size(); ++u) {
    MetricReport row{exp, case_prefix + "/unauthorized" + std::to_string(u)};
    row.n_pairs = pairs.size();
    row.values["acc"] =
        verification_accuracy(wb.unauthorized[u], protect, pairs, 0.2);
    reports.push_back(std::move(row));
  }
}

}  // namespace exp_detail

// ---------------------------------------------------------------------------
// Registered experiments

inline ExperimentResult exp_init(const ExperimentConfig& cfg) {
  using namespace exp_detail;
  ExperimentResult res;
  Workbench wb = make_workbench(cfg);
  Model shallow = wb.auth_shallow();
  auto pairs = pair_budget(wb.pairs, cfg.grid_pairs);
  save_artifact(cfg, "exp-init_orig0.ppm", pairs[0].image1, res.artifacts);

  const std::pair<InitMode, std::string> modes[] = {
      {InitMode::GaussianNoise, "gaussian_noise"},
      {InitMode::RandomPermute, "random_permute"},
      {InitMode::GaussianBlur, "gaussian_blur"},
  };
  std::uint64_t variant = 0;
  for (const auto& [mode, name] : modes) {
    PmtConfig pc = cfg.pmt;
    pc.init = mode;
    auto protecteds = protect_pair_firsts(cfg, pc, shallow, pairs, ++variant);
    accuracy_rows(cfg, wb, "exp-init", name, pairs, protecteds, res.reports);
    save_artifact(cfg, "exp-init_" + name + "_obf0.ppm", protecteds[0],
                  res.artifacts);
  }
  return res;
}

inline ExperimentResult exp_augment(const ExperimentConfig& cfg) {
  using namespace exp_detail;
  ExperimentResult res;
  Workbench wb = make_workbench(cfg);
  Model shallow = wb.auth_shallow();
  auto pairs = pair_budget(wb.pairs, cfg.grid_pairs);

  const std::pair<AugmentMode, std::string> modes[] = {
      {AugmentMode::none(), "none"},
      {AugmentMode::random_noise(cfg.pmt.augment.sigma), "random_noise"},
      {AugmentMode::random_affine(), "random_affine"},
      {AugmentMode::mix(), "mix"},
  };
  std::uint64_t variant = 0;
  for (const auto& [mode, name] : modes) {
    for (bool aggregate : {true, false}) {
      PmtConfig pc = cfg.pmt;
      pc.augment = mode;
      pc.aggregate_layers = aggregate ? cfg.pmt.aggregate_layers
                                      : std::vector<std::size_t>{};
      const std::string case_prefix =
          name + std::string("/agg=") + (aggregate ? "on" : "off");
      auto protecteds = protect_pair_firsts(cfg, pc, shallow, pairs, ++variant);
      accuracy_rows(cfg, wb, "exp-augment", case_prefix, pairs, protecteds,
                    res.reports);
    }
  }
  save_artifact(cfg, "exp-augment_orig0.ppm", pairs[0].image1, res.artifacts);
  return res;
}

inline ExperimentResult exp_kernel(const ExperimentConfig& cfg) {
  using namespace exp_detail;
  ExperimentResult res;
  Workbench wb = make_workbench(cfg);
  Model shallow = wb.auth_shallow();
  auto pairs = pair_budget(wb.pairs, cfg.grid_pairs);

  std::vector<std::pair<KernelSpec, std::string>> kernels{
      {KernelSpec::none(), "none"}};
  for (std::size_t k = 1; k <= 3; ++k) {
    kernels.emplace_back(KernelSpec::linear(k), "linear" + std::to_string(k));
    kernels.emplace_back(KernelSpec::gaussian(k), "gaussian" + std::to_string(k));
  }
  std::uint64_t variant = 0;
  for (const auto& [kernel, name] : kernels) {
    PmtConfig pc = cfg.pmt;
    pc.kernel = kernel;
    auto protecteds = protect_pair_firsts(cfg, pc, shallow, pairs, ++variant);
    accuracy_rows(cfg, wb, "exp-kernel", name, pairs, protecteds, res.reports);
  }
  return res;
}

inline ExperimentResult exp_recon(const ExperimentConfig& cfg) {
  using namespace exp_detail;
  ExperimentResult res;
  Workbench wb = make_workbench(cfg, /*with_unauthorized=*/false);
  Model shallow = wb.auth_shallow();

  // attacker's decoder, trained on an auxiliary identity pool
  FaceDataset aux = make_dataset(cfg.decoder_aux_identities,
                                 cfg.decoder_aux_renders,
                                 cfg.decoder_aux_base_seed);
  std::vector<std::pair<Tensor, Tensor>> dec_pairs;
  for (const auto& s : aux.images) {
    dec_pairs.emplace_back(model_forward(shallow, s.image), s.image);
  }
  TrainHyper dec_hyper = cfg.decoder_train;
  dec_hyper.seed = job_seed(cfg, kDecoder, 0, 0);
  Model decoder = train_decoder(dec_pairs, default_decoder_spec(), dec_hyper).model;

  const std::vector<Tensor>& xs = wb.eval_images;
  auto obfuscations = protect_images(cfg, cfg.pmt, shallow, xs, 1);

  // feature sets: clean, random-noise baseline (sigma 0.3), pmt
  struct InputSet {
    std::string name;
    std::vector<Tensor> features;
  };
  std::vector<InputSet> inputs(3);
  inputs[0].name = "clean";
  inputs[1].name = "noise";
  inputs[2].name = "pmt";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    inputs[0].features.push_back(model_forward(shallow, xs[i]));
    Tensor noisy = xs[i];
    auto s = rng::Stream(job_seed(cfg, kNoiseBaseline, 0, i));
    for (double& v : noisy.values) v += s.gaussian(0.0, 0.3);
    clamp01_inplace(noisy);
    inputs[1].features.push_back(model_forward(shallow, noisy));
    inputs[2].features.push_back(obfuscations[i].features);
  }

  save_artifact(cfg, "exp-recon_orig0.ppm", xs[0], res.artifacts);
  save_artifact(cfg, "exp-recon_pmt_obf0.ppm", obfuscations[0].image, res.artifacts);

  for (const auto& input : inputs) {
    // white-box: per-image optimization
    std::vector<Tensor> wrecons(xs.size());
    parallel_for(
        xs.size(),
        [&](std::size_t i) {
          AttackConfig ac = cfg.attack;
          ac.seed = job_seed(cfg, kWhitebox, 1, i);
          wrecons[i] = whitebox_reconstruct(input.features[i], shallow, ac);
        },
        cfg.workers);
    // black-box: decoder forward
    std::vector<Tensor> brecons;
    for (const Tensor& z : input.features) {
      brecons.push_back(modelbased_reconstruct(decoder, z));
    }

    for (const auto& [attack_name, recons] :
         {std::pair<std::string, const std::vector<Tensor>*>{"whitebox", &wrecons},
          {"blackbox", &brecons}}) {
      MetricReport row{"exp-recon", attack_name + "/" + input.name};
      row.n_images = xs.size();
      double s = 0, p = 0, c = 0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        s += ssim((*recons)[i], xs[i]);
        p += psnr((*recons)[i], xs[i]);
        c += cos_sim(embed(wb.auth(), (*recons)[i]), embed(wb.auth(), xs[i]));
      }
      row.values["ssim"] = s / double(xs.size());
      row.values["psnr"] = p / double(xs.size());
      row.values["cos"] = c / double(xs.size());
      row.values["srra"] = srra(xs, *recons, wb.auth(), 0.2);
      res.reports.push_back(std::move(row));
      save_artifact(cfg, "exp-recon_" + attack_name + "_" + input.name + "_rec0.ppm",
                    (*recons)[0], res.artifacts);
    }
  }
  return res;
}

inline ExperimentResult exp_abuse(const ExperimentConfig& cfg) {
  using namespace exp_detail;
  ExperimentResult res;
  Workbench wb = make_workbench(cfg);

  // evaluated models: every authorized and unauthorized model
  std::vector<const Model*> evaluated;
  std::vector<std::string> names;
  for (std::size_t a = 0; a < wb.authorized.size(); ++a) {
    evaluated.push_back(&wb.authorized[a]);
    names.push_back("authorized" + std::to_string(a));
  }
  for (std::size_t u = 0; u < wb.unauthorized.size(); ++u) {
    evaluated.push_back(&wb.unauthorized[u]);
    names.push_back("unauthorized" + std::to_string(u));
  }

  // one clean row per evaluated model
  for (std::size_t m = 0; m < evaluated.size(); ++m) {
    MetricReport row{"exp-abuse", "clean/" + names[m]};
    row.n_pairs = wb.pairs.size();
    row.values["acc"] =
        verification_accuracy(*evaluated[m], identity_protect(), wb.pairs, 0.2);
    res.reports.push_back(std::move(row));
  }

  // one row per (authorized model used for protection, evaluated model)
  for (std::size_t a = 0; a < wb.authorized.size(); ++a) {
    Model shallow = split_model(wb.authorized[a], kDefaultSplit).shallow();
    auto protecteds = protect_pair_firsts(cfg, cfg.pmt, shallow, wb.pairs, a + 1);
    auto protect = lookup_protect(protecteds);
    for (std::size_t m = 0; m < evaluated.size(); ++m) {
      MetricReport row{"exp-abuse",
                       "pmt[" + names[a] + "]/" + names[m]};
      row.n_pairs = wb.pairs.size();
      row.values["acc"] = verification_accuracy(*evaluated[m], protect, wb.pairs, 0.2);
      if (m == a) {
        std::vector<Tensor> firsts;
        for (const auto& p : wb.pairs) firsts.push_back(p.image1);
        row.values["ssim"] = mean_ssim(protecteds, firsts);
      }
      res.reports.push_back(std::move(row));
    }
    if (a == 0) {
      save_artifact(cfg, "exp-abuse_orig0.ppm", wb.pairs[0].image1, res.artifacts);
      save_artifact(cfg, "exp-abuse_obf0.ppm", protecteds[0], res.artifacts);
    }
  }
  return res;
}

inline ExperimentResult exp_scale(const ExperimentConfig& cfg) {
  using namespace exp_detail;
  ExperimentResult res;
  Workbench wb = make_workbench(cfg);

  // model pool: authorized models first, then unauthorized
  std::vector<const Model*> pool;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < wb.authorized.size(); ++i) {
    pool.push_back(&wb.authorized[i]);
    names.push_back("m" + std::to_string(pool.size() - 1));
  }
  for (std::size_t i = 0; i < wb.unauthorized.size(); ++i) {
    pool.push_back(&wb.unauthorized[i]);
    names.push_back("m" + std::to_string(pool.size() - 1));
  }
  if (pool.size() < 3) throw ConfigError("exp-scale needs at least 3 models");

  auto run_subset = [&](const std::vector<std::size_t>& subset,
                        std::uint64_t variant) {
    std::vector<Model> shallows;
    std::string label;
    for (std::size_t idx : subset) {
      shallows.push_back(split_model(*pool[idx], kDefaultSplit).shallow());
      label += (label.empty() ? "" : "+") + names[idx];
    }
    std::vector<Tensor> protecteds(wb.pairs.size());
    parallel_for(
        wb.pairs.size(),
        [&](std::size_t i) {
          PmtConfig local = cfg.pmt;
          local.master_seed = job_seed(cfg, kPairProtect, variant, i);
          protecteds[i] =
              pmt_protect_multi(wb.pairs[i].image1, shallows, local).image;
        },
        cfg.workers);
    auto protect = lookup_protect(protecteds);
    for (std::size_t m = 0; m < pool.size(); ++m) {
      MetricReport row{"exp-scale", label + "/" + names[m]};
      row.n_pairs = wb.pairs.size();
      row.values["acc"] = verification_accuracy(*pool[m], protect, wb.pairs, 0.2);
      res.reports.push_back(std::move(row));
    }
  };
  run_subset({0}, 1);
  run_subset({0, 1}, 2);

  // clean reference per model
  for (std::size_t m = 0; m < pool.size(); ++m) {
    MetricReport row{"exp-scale", "clean/" + names[m]};
    row.n_pairs = wb.pairs.size();
    row.values["acc"] =
        verification_accuracy(*pool[m], identity_protect(), wb.pairs, 0.2);
    res.reports.push_back(std::move(row));
  }
  return res;
}

inline ExperimentResult exp_robust(const ExperimentConfig& cfg) {
  using namespace exp_detail;
  ExperimentResult res;
  Workbench wb = make_workbench(cfg, /*with_unauthorized=*/false);
  Model shallow = wb.auth_shallow();

  const std::vector<Tensor>& xs = wb.eval_images;
  auto obfuscations = protect_images(cfg, cfg.pmt, shallow, xs, 1);
  std::vector<Tensor> protecteds;
  for (auto& ob : obfuscations) protecteds.push_back(ob.image);

  std::uint64_t variant = 0;
  for (double sigma : {0.0, 0.05, 0.1, 0.15, 0.2}) {
    char label[32];
    std::snprintf(label, sizeof(label), "sigma=%.2f", sigma);
    for (const auto& [name, images] :
         {std::pair<std::string, const std::vector<Tensor>*>{"original", &xs},
          {"protected", &protecteds}}) {
      UpResult r = up_metric(xs, *images, wb.auth(), up_params(cfg, sigma, ++variant));
      MetricReport row{"exp-robust", std::string(label) + "/" + name};
      row.n_images = xs.size();
      row.values["up_utility"] = r.utility;
      row.values["up_privacy"] = r.privacy;
      row.values["up_total"] = r.total;
      res.reports.push_back(std::move(row));
    }
  }
  save_artifact(cfg, "exp-robust_orig0.ppm", xs[0], res.artifacts);
  save_artifact(cfg, "exp-robust_obf0.ppm", protecteds[0], res.artifacts);
  return res;
}

inline ExperimentResult exp_ablation(const ExperimentConfig& cfg) {
  using namespace exp_detail;
  ExperimentResult res;
  Workbench wb = make_workbench(cfg, /*with_unauthorized=*/false);
  Model shallow = wb.auth_shallow();
  auto pairs = pair_budget(wb.pairs, cfg.grid_pairs);

  // exactly one row per on/off combination of (augmentation,
  // translation-invariant smoothing, layer aggregation); acc is the
  // authorized model's strict accuracy on the protected pairs
  std::vector<Tensor> firsts;
  for (const auto& p : pairs) firsts.push_back(p.image1);
  std::uint64_t variant = 0;
  for (bool aug : {false, true}) {
    for (bool ti : {false, true}) {
      for (bool agg : {false, true}) {
        PmtConfig pc = cfg.pmt;
        if (!aug) pc.augment = AugmentMode::none();
        if (!ti) pc.kernel = KernelSpec::none();
        if (!agg) pc.aggregate_layers.clear();
        const std::string combo = std::string("A") + (aug ? "1" : "0") + "T" +
                                  (ti ? "1" : "0") + "L" + (agg ? "1" : "0");
        auto protecteds = protect_pair_firsts(cfg, pc, shallow, pairs, ++variant);
        MetricReport row{"exp-ablation", combo};
        row.n_pairs = pairs.size();
        row.values["acc"] =
            verification_accuracy(wb.auth(), lookup_protect(protecteds), pairs, 0.2);
        row.values["ssim"] = mean_ssim(protecteds, firsts);
        UpResult up = up_metric(firsts, protecteds, wb.auth(),
                                up_params(cfg, cfg.up_sigma, variant));
        row.values["up_utility"] = up.utility;
        row.values["up_privacy"] = up.privacy;
        row.values["up_total"] = up.total;
        res.reports.push_back(std::move(row));
      }
    }
  }
  return res;
}

// ---------------------------------------------------------------------------

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec || !std::filesystem::is_directory(cfg.out_dir)) {
    throw IoError("cannot create output directory " + cfg.out_dir);
  }

  ExperimentResult res;
  if (cfg.experiment == "exp-init") {
    res = exp_init(cfg);
  } else if (cfg.experiment == "exp-augment") {
    res = exp_augment(cfg);
  } else if (cfg.experiment == "exp-kernel") {
    res = exp_kernel(cfg);
  } else if (cfg.experiment == "exp-recon") {
    res = exp_recon(cfg);
  } else if (cfg.experiment == "exp-abuse") {
    res = exp_abuse(cfg);
  } else if (cfg.experiment == "exp-scale") {
    res = exp_scale(cfg);
  } else if (cfg.experiment == "exp-robust") {
    res = exp_robust(cfg);
  } else if (cfg.experiment == "exp-ablation") {
    res = exp_ablation(cfg);
  } else {
    throw UnknownExperimentError("unknown experiment \"" + cfg.experiment + "\"");
  }

  const auto csv = std::filesystem::path(cfg.out_dir) / (cfg.experiment + ".csv");
  emit_report(res.reports, csv.string());
  res.artifacts.push_back(csv.string());
  return res;
}

inline const std::vector<std::string>& registered_experiments() {
  static const std::vector<std::string> names{
      "exp-init",  "exp-augment", "exp-kernel", "exp-recon",
      "exp-abuse", "exp-scale",   "exp-robust", "exp-ablation",
  };
  return names;
}

}  // namespace pmt
