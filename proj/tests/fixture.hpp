#pragma once

// Writes small on-disk datasets (AMX files, manifest, run config) for tests
// that drive the sweep and the CLI end to end.

#include "layerprobe/exchange.hpp"
#include "test_support.hpp"

#include <json.hpp>

#include <fstream>
#include <string>
#include <vector>

namespace layerprobe::testing {

struct LayerSpec {
  std::string model;
  std::string layer;
  std::int64_t index = 0;
  Eigen::MatrixXd values;
};

struct Dataset {
  std::filesystem::path dir;
  std::filesystem::path manifest;
  std::filesystem::path config;
  std::vector<std::string> activation_files;
};

inline Dataset write_dataset(const std::filesystem::path &dir,
                             const std::vector<LayerSpec> &layers,
                             const std::vector<TargetSet> &targets,
                             nlohmann::json config = nlohmann::json::object()) {
  Dataset ds;
  ds.dir = dir;
  std::filesystem::create_directories(dir);
  Manifest m;
  m.dataset_id = "fixture";
  m.base_dir = dir;
  for (const auto &l : layers) {
    const std::string file = l.model + "__" + l.layer + ".amx";
    write_matrix(make_activation(l.model, l.layer, l.index, l.values), dir / file);
    m.entries.push_back(make_entry(dir, file, EntryKind::Activation));
    ds.activation_files.push_back(file);
  }
  std::vector<std::string> ids;
  for (const auto &t : targets) {
    const std::string id = target_id(t);
    const std::string file = "target_" + id + ".amx";
    std::visit([&](const auto &v) { write_matrix(v, dir / file); }, t);
    const bool neural = std::holds_alternative<NeuralTargets>(t);
    m.entries.push_back(
        make_entry(dir, file, neural ? EntryKind::Neural : EntryKind::Scalar));
    ids.push_back(id);
  }
  ds.manifest = dir / "manifest.json";
  write_manifest(m, ds.manifest);

  if (!config.contains("manifest"))
    config["manifest"] = "manifest.json";
  if (!config.contains("targets"))
    config["targets"] = ids;
  if (!config.contains("output"))
    config["output"] = "out";
  ds.config = dir / "run_config.json";
  std::ofstream(ds.config) << config.dump(2) << '\n';
  return ds;
}

/// Overwrites one byte in the middle of a file.
inline void corrupt_byte(const std::filesystem::path &file, std::size_t offset_from_end = 9) {
  std::string bytes = read_file(file);
  bytes[bytes.size() - offset_from_end] ^= 0x5A;
  std::ofstream(file, std::ios::binary | std::ios::trunc) << bytes;
}

} // namespace layerprobe::testing
