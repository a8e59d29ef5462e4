#pragma once

#include "layerprobe/pls.hpp"
#include "layerprobe/scorer.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace layerprobe {

inline constexpr int kDefaultComponents = 25;
inline constexpr int kDefaultNeuralFolds = 10;
inline constexpr int kDefaultScalarFolds = 5;

enum class RunMode { Reference, Parallel };

std::string_view to_string(RunMode m) noexcept;
RunMode parse_run_mode(std::string_view text);

struct CvConfig {
  std::optional<int> k; // unset: 10 for neural targets, 5 for scalar targets
  std::uint64_t seed = 0;
  std::map<std::string, std::filesystem::path> fold_files; // target id -> file

  int folds_for(Metric m) const noexcept {
    if (k)
      return *k;
    return m == Metric::NeuralPearsonMedian ? kDefaultNeuralFolds
                                            : kDefaultScalarFolds;
  }
};

/// Declarative run description, read from a JSON file. Relative paths are
/// resolved against the directory of that file. Unknown keys are rejected.
struct RunConfig {
  std::filesystem::path manifest;
  std::vector<std::string> targets;
  PlsConfig pls{kDefaultComponents, 500, 1e-6, false};
  CvConfig cv;
  int min_units = kDefaultMinUnits;
  std::filesystem::path output = "out";
  int workers = 1;
  RunMode mode = RunMode::Reference;

  std::string source_text; // verbatim config file contents
};

RunConfig parse_run_config(std::string_view text,
                           const std::filesystem::path &base_dir);
RunConfig load_run_config(const std::filesystem::path &path);

/// The scoring-relevant part of a config (no paths, worker counts or mode),
/// used for provenance and resume keys.
nlohmann::json spec_snapshot(const RunConfig &cfg);

} // namespace layerprobe
