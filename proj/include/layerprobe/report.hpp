#pragma once

#include "layerprobe/scorer.hpp"

#include <json.hpp>

#include <filesystem>
#include <string_view>
#include <vector>

namespace layerprobe {

inline constexpr std::string_view kReportFormat = "layerprobe.sweep/1";
inline constexpr std::string_view kProvenanceFile = "provenance.json";
inline constexpr std::string_view kRecordsFile = "records.jsonl";

/// Scores across layers, models and targets plus what is needed to re-run.
struct SweepReport {
  std::vector<ScoreRecord> records;
  nlohmann::json provenance = nlohmann::json::object();
};

nlohmann::json to_json(const ScoreRecord &r);
ScoreRecord record_from_json(const nlohmann::json &j);

/// Orders by (model_id, layer_index, layer_id, target_id).
void sort_canonical(std::vector<ScoreRecord> &records);

/// Writes `provenance.json` and `records.jsonl` (one record per line, in
/// canonical order) under `dir`.
void write_report(const SweepReport &report, const std::filesystem::path &dir);

/// Refuses reports whose format tag differs from kReportFormat and reports
/// with duplicate (model_id, layer_id, target_id) keys.
SweepReport load_report(const std::filesystem::path &dir);

} // namespace layerprobe
