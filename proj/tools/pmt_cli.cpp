// pmt_cli — config-driven front end for the obfuscation/attack/metric suite.
//
// Subcommands: gen-data, train, protect, attack, eval, exp <name>, report.
// Every subcommand takes --config (JSON) and --seed; --seed and --out
// override the config's master_seed / out_dir. Exit codes: 0 success,
// 2 unknown experiment, 3 I/O failure, 4 invalid config or input.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pmt/config.hpp"
#include "pmt/dataset_io.hpp"
#include "pmt/experiments.hpp"
#include "pmt/metrics.hpp"
#include "pmt/ppm.hpp"
#include "pmt/report.hpp"
#include "pmt/serialize.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> sets;  // top-level key=value overrides
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON config file");
  cmd->add_option("--seed", args.seed, "override master_seed");
  cmd->add_option("--out", args.out, "override out_dir");
  cmd->add_option("--set", args.sets,
                  "override a top-level config key, e.g. --set eval_images=20");
}

pmt::ExperimentConfig resolve_config(const CommonArgs& args) {
  nlohmann::json j = nlohmann::json::object();
  if (!args.config_path.empty()) {
    pmt::Bytes raw = pmt::read_file(args.config_path);
    try {
      j = nlohmann::json::parse(raw.begin(), raw.end());
    } catch (const nlohmann::json::parse_error& e) {
      throw pmt::ConfigError(std::string("config parse error: ") + e.what());
    }
  }
  for (const std::string& kv : args.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw pmt::ConfigError("--set expects key=value, got \"" + kv + "\"");
    }
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    try {
      j[key] = nlohmann::json::parse(value);
    } catch (const nlohmann::json::parse_error&) {
      j[key] = value;  // bare string
    }
  }
  pmt::ExperimentConfig cfg;
  try {
    cfg = pmt::config_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw pmt::ConfigError(std::string("config error: ") + e.what());
  }
  if (args.seed) cfg.master_seed = *args.seed;
  if (args.out) cfg.out_dir = *args.out;
  return cfg;
}

void ensure_out_dir(const pmt::ExperimentConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec || !std::filesystem::is_directory(cfg.out_dir)) {
    throw pmt::IoError("cannot create output directory " + cfg.out_dir);
  }
}

std::string out_path(const pmt::ExperimentConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.out_dir) / name).string();
}

int run_gen_data(const CommonArgs& args) {
  pmt::ExperimentConfig cfg = resolve_config(args);
  cfg.validate();
  ensure_out_dir(cfg);
  pmt::FaceDataset ds = pmt::make_dataset(
      cfg.dataset.identities,
      cfg.dataset.renders_per_id + cfg.dataset.eval_renders,
      cfg.dataset.base_seed);
  const std::string dir = out_path(cfg, "dataset");
  pmt::export_dataset(dir, ds);
  std::printf("wrote %zu renders (%zu identities) to %s\n", ds.images.size(),
              cfg.dataset.identities, dir.c_str());
  return 0;
}

int run_train(const CommonArgs& args) {
  pmt::ExperimentConfig cfg = resolve_config(args);
  cfg.validate();
  ensure_out_dir(cfg);
  pmt::FaceDataset ds = pmt::make_dataset(
      cfg.dataset.identities, cfg.dataset.renders_per_id, cfg.dataset.base_seed);
  pmt::Model authorized0;
  auto train_one = [&](const pmt::ModelRef& ref, const std::string& name) {
    pmt::TrainHyper hyper = cfg.train;
    hyper.seed = ref.seed;
    pmt::TrainResult r = pmt::train_recognizer(
        pmt::spec_by_name(ref.arch, cfg.dataset.identities), ds.images, hyper);
    const std::string path = out_path(cfg, name + ".pmtw");
    pmt::write_file(path, pmt::serialize_weights(r.model));
    std::printf("%s: arch=%s seed=%llu final-epoch loss %.4f -> %s\n",
                name.c_str(), ref.arch.c_str(),
                static_cast<unsigned long long>(ref.seed),
                r.epoch_losses.back(), path.c_str());
    return r.model;
  };
  for (std::size_t i = 0; i < cfg.authorized.size(); ++i) {
    pmt::Model m = train_one(cfg.authorized[i], "authorized" + std::to_string(i));
    if (i == 0) authorized0 = std::move(m);
  }
  for (std::size_t i = 0; i < cfg.unauthorized.size(); ++i) {
    train_one(cfg.unauthorized[i], "unauthorized" + std::to_string(i));
  }

  // attacker models: a feature decoder for authorized0 and an attribute probe
  {
    pmt::Model shallow = pmt::split_model(authorized0, pmt::kDefaultSplit).shallow();
    pmt::FaceDataset aux = pmt::make_dataset(cfg.decoder_aux_identities,
                                             cfg.decoder_aux_renders,
                                             cfg.decoder_aux_base_seed);
    std::vector<std::pair<pmt::Tensor, pmt::Tensor>> dec_pairs;
    for (const auto& s : aux.images) {
      dec_pairs.emplace_back(pmt::model_forward(shallow, s.image), s.image);
    }
    pmt::Model decoder =
        pmt::train_decoder(dec_pairs, pmt::default_decoder_spec(), cfg.decoder_train)
            .model;
    const std::string dec_path = out_path(cfg, "decoder.pmtw");
    pmt::write_file(dec_path, pmt::serialize_weights(decoder));
    std::printf("decoder: %zu aux pairs -> %s\n", dec_pairs.size(), dec_path.c_str());

    std::vector<pmt::LabeledImage> tag_data;
    std::size_t have[2] = {0, 0};
    for (std::uint64_t s = 3000; have[0] < 8 || have[1] < 8; ++s) {
      const bool tag = pmt::gen_identity(s).attribute_tag;
      if (have[tag] >= 8) continue;
      ++have[tag];
      for (std::size_t k = 0; k < 10; ++k) {
        tag_data.push_back({pmt::render_indexed(s, k), tag ? 1u : 0u});
      }
    }
    pmt::TrainHyper probe_hyper = cfg.train;
    probe_hyper.epochs = 20;
    probe_hyper.seed = 9;
    pmt::Model probe = pmt::train_attribute_probe(tag_data, probe_hyper).model;
    const std::string probe_path = out_path(cfg, "probe.pmtw");
    pmt::write_file(probe_path, pmt::serialize_weights(probe));
    std::printf("attribute probe -> %s\n", probe_path.c_str());
  }
  return 0;
}

int run_protect(const CommonArgs& args, const std::string& image_path,
                const std::string& weights_path, const std::string& arch,
                const std::string& out_image, const std::string& out_features) {
  pmt::ExperimentConfig cfg = resolve_config(args);
  cfg.validate();
  pmt::Model model = pmt::deserialize_weights(
      pmt::read_file(weights_path),
      pmt::spec_by_name(arch, cfg.dataset.identities));
  pmt::Model shallow = pmt::split_model(model, pmt::kDefaultSplit).shallow();
  pmt::Tensor x = pmt::load_ppm(image_path);
  pmt::PmtConfig pc = cfg.pmt;
  pc.master_seed = cfg.master_seed;
  pmt::Obfuscation ob = pmt::pmt_protect(x, shallow, pc);
  if (!out_image.empty()) {
    if (!pc.clamp_output) {
      throw pmt::ConfigError("PPM export needs pmt.clamp_output=true");
    }
    pmt::save_ppm(out_image, ob.image);
    std::printf("obfuscated image -> %s\n", out_image.c_str());
  }
  if (!out_features.empty()) {
    pmt::write_file(out_features,
                    pmt::serialize_tensors({{"feature", ob.features}}));
    std::printf("obfuscated features -> %s\n", out_features.c_str());
  }
  std::printf("final objective %.6g after %zu iterations\n",
              ob.loss_trace.empty() ? 0.0 : ob.loss_trace.back(),
              pc.iterations);
  return 0;
}

pmt::Tensor load_feature(const std::string& path) {
  pmt::NamedTensors named = pmt::deserialize_tensors(pmt::read_file(path));
  for (auto& [name, t] : named) {
    if (name == "feature") return std::move(t);
  }
  throw pmt::ConfigError("no \"feature\" tensor in " + path);
}

int run_attack(const CommonArgs& args, const std::string& mode,
               const std::string& features_path, const std::string& weights_path,
               const std::string& arch, const std::string& decoder_path,
               const std::string& out_image) {
  pmt::ExperimentConfig cfg = resolve_config(args);
  cfg.validate();
  pmt::Tensor z = load_feature(features_path);
  pmt::Tensor recon;
  if (mode == "whitebox") {
    if (weights_path.empty()) {
      throw pmt::ConfigError("whitebox attack needs --weights");
    }
    pmt::Model model = pmt::deserialize_weights(
        pmt::read_file(weights_path),
        pmt::spec_by_name(arch, cfg.dataset.identities));
    pmt::Model shallow = pmt::split_model(model, pmt::kDefaultSplit).shallow();
    pmt::AttackConfig ac = cfg.attack;
    ac.seed = cfg.master_seed;
    recon = pmt::whitebox_reconstruct(z, shallow, ac);
  } else if (mode == "decoder") {
    if (decoder_path.empty()) {
      throw pmt::ConfigError("decoder attack needs --decoder-weights");
    }
    pmt::Model decoder = pmt::deserialize_weights(pmt::read_file(decoder_path),
                                                  pmt::default_decoder_spec());
    recon = pmt::modelbased_reconstruct(decoder, z);
  } else {
    throw pmt::ConfigError("unknown attack mode \"" + mode +
                           "\" (whitebox|decoder)");
  }
  pmt::save_ppm(out_image, recon);
  std::printf("reconstruction -> %s\n", out_image.c_str());
  return 0;
}

int run_eval(const CommonArgs& args) {
  pmt::ExperimentConfig cfg = resolve_config(args);
  cfg.validate();
  ensure_out_dir(cfg);
  pmt::FaceDataset ds = pmt::make_dataset(
      cfg.dataset.identities, cfg.dataset.renders_per_id, cfg.dataset.base_seed);
  auto pairs = pmt::make_pairs(ds.identity_seeds, cfg.dataset.eval_renders,
                               cfg.dataset.pair_count, cfg.master_seed,
                               cfg.dataset.renders_per_id);
  std::vector<pmt::MetricReport> reports;
  auto eval_one = [&](const pmt::ModelRef& ref, const std::string& name) {
    pmt::TrainHyper hyper = cfg.train;
    hyper.seed = ref.seed;
    pmt::Model model =
        pmt::train_recognizer(pmt::spec_by_name(ref.arch, cfg.dataset.identities),
                              ds.images, hyper)
            .model;
    pmt::MetricReport row{"eval", "clean/" + name};
    row.n_pairs = pairs.size();
    row.values["acc"] =
        pmt::verification_accuracy(model, pmt::identity_protect(), pairs, 0.2);
    std::printf("%s: clean verification accuracy %.4f\n", name.c_str(),
                row.values["acc"]);
    reports.push_back(std::move(row));
  };
  for (std::size_t i = 0; i < cfg.authorized.size(); ++i) {
    eval_one(cfg.authorized[i], "authorized" + std::to_string(i));
  }
  for (std::size_t i = 0; i < cfg.unauthorized.size(); ++i) {
    eval_one(cfg.unauthorized[i], "unauthorized" + std::to_string(i));
  }
  const std::string path = out_path(cfg, "eval.csv");
  pmt::emit_report(reports, path);
  std::printf("report -> %s\n", path.c_str());
  return 0;
}

int run_exp(const CommonArgs& args, const std::string& name) {
  pmt::ExperimentConfig cfg = resolve_config(args);
  if (!name.empty()) cfg.experiment = name;
  pmt::ExperimentResult res = pmt::run_experiment(cfg);
  std::printf("experiment %s: %zu report rows\n", cfg.experiment.c_str(),
              res.reports.size());
  for (const std::string& f : res.artifacts) std::printf("  %s\n", f.c_str());
  return 0;
}

int run_report(const std::vector<std::string>& inputs, const std::string& out) {
  std::vector<pmt::MetricReport> all;
  for (const std::string& path : inputs) {
    auto rows = pmt::load_report(path);
    all.insert(all.end(), rows.begin(), rows.end());
  }
  pmt::emit_report(all, out);
  std::printf("merged %zu rows -> %s\n", all.size(), out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"privacy-minimizing obfuscation workbench"};
  app.require_subcommand(1);

  CommonArgs common;
  int rc = 0;

  auto* gen = app.add_subcommand("gen-data", "export the procedural dataset as PPM files");
  add_common(gen, common);
  gen->callback([&] { rc = run_gen_data(common); });

  auto* train = app.add_subcommand("train", "train recognizers and write .pmtw weights");
  add_common(train, common);
  train->callback([&] { rc = run_train(common); });

  auto* protect = app.add_subcommand("protect", "obfuscate one image");
  add_common(protect, common);
  std::string image_path, weights_path, arch = "default";
  std::string out_image, out_features;
  protect->add_option("--image", image_path, "input PPM")->required();
  protect->add_option("--weights", weights_path, "recognizer .pmtw")->required();
  protect->add_option("--arch", arch, "model arch (default|slim)");
  protect->add_option("--out-image", out_image, "obfuscated PPM path");
  protect->add_option("--out-features", out_features, "obfuscated feature .pmtw path");
  protect->callback([&] {
    rc = run_protect(common, image_path, weights_path, arch, out_image, out_features);
  });

  auto* attack = app.add_subcommand("attack", "reconstruct an image from features");
  add_common(attack, common);
  std::string mode = "whitebox", features_path, decoder_path, attack_out = "recon.ppm";
  attack->add_option("--mode", mode, "whitebox|decoder");
  attack->add_option("--features", features_path, "feature .pmtw")->required();
  attack->add_option("--weights", weights_path, "recognizer .pmtw (whitebox)");
  attack->add_option("--arch", arch, "model arch (default|slim)");
  attack->add_option("--decoder-weights", decoder_path, "decoder .pmtw (decoder mode)");
  attack->add_option("--out-image", attack_out, "reconstruction PPM path");
  attack->callback([&] {
    rc = run_attack(common, mode, features_path, weights_path, arch, decoder_path,
                    attack_out);
  });

  auto* eval = app.add_subcommand("eval", "clean verification accuracy per model");
  add_common(eval, common);
  eval->callback([&] { rc = run_eval(common); });

  auto* exp = app.add_subcommand("exp", "run a registered experiment");
  add_common(exp, common);
  std::string exp_name;
  exp->add_option("name", exp_name, "experiment name (e.g. exp-abuse)");
  exp->callback([&] { rc = run_exp(common, exp_name); });

  auto* report = app.add_subcommand("report", "merge metric CSV files");
  std::vector<std::string> report_inputs;
  std::string report_out = "report.csv";
  report->add_option("inputs", report_inputs, "input CSV files")->required();
  report->add_option("--out", report_out, "merged CSV path");
  report->callback([&] { rc = run_report(report_inputs, report_out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const pmt::UnknownExperimentError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const pmt::IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const pmt::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
  return rc;
}
