#pragma once

#include <filesystem>
#include <string>

#include "pmt/datagen.hpp"
#include "pmt/ppm.hpp"

namespace pmt {

// Directory-of-PPM convention: one file per render, named
// "<identity_seed>_<variation_index>.ppm".
inline void export_dataset(const std::string& dir, const FaceDataset& ds) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
  std::size_t i = 0;
  for (std::size_t id = 0; id < ds.identity_seeds.size(); ++id) {
    for (std::size_t k = 0; k < ds.renders_per_id; ++k, ++i) {
      const std::string name = std::to_string(ds.identity_seeds[id]) + "_" +
                               std::to_string(ds.variation_base + k) + ".ppm";
      save_ppm((std::filesystem::path(dir) / name).string(), ds.images[i].image);
    }
  }
}

struct ImportedRender {
  std::uint64_t identity_seed;
  std::size_t variation_index;
  Tensor image;
};

inline std::vector<ImportedRender> import_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  std::vector<ImportedRender> out;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".ppm") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& p : files) {
    const std::string stem = p.stem().string();
    const auto sep = stem.find('_');
    if (sep == std::string::npos) continue;
    ImportedRender r;
    r.identity_seed = std::stoull(stem.substr(0, sep));
    r.variation_index = std::stoul(stem.substr(sep + 1));
    r.image = load_ppm(p.string());
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace pmt
