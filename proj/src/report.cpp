#include "layerprobe/report.hpp"

#include "layerprobe/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

namespace layerprobe {

using nlohmann::json;

namespace {

json number_or_null(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

double number_from(const json &j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

void write_text(const std::filesystem::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error(Errc::Io, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out)
    throw Error(Errc::Io, "write failed for " + path.string());
}

} // namespace

json to_json(const ScoreRecord &r) {
  json per_fold = json::array();
  for (double s : r.per_fold_scores)
    per_fold.push_back(number_or_null(s));
  return {
      {"model_id", r.model_id},
      {"layer_id", r.layer_id},
      {"layer_index", r.layer_index},
      {"target_id", r.target_id},
      {"metric", to_string(r.metric)},
      {"score", number_or_null(r.score)},
      {"per_fold_scores", per_fold},
      {"components_used", r.components_used},
      {"excluded", r.excluded},
      {"exclusion_reason", r.exclusion_reason},
      {"warnings", r.warnings},
      {"n_stimuli", r.n_stimuli},
      {"units", r.units},
      {"dropped_stimuli", r.dropped_stimuli},
      {"k", r.k},
      {"fold_seed", r.fold_seed},
      {"resume_key", r.resume_key},
  };
}

ScoreRecord record_from_json(const json &j) {
  try {
    ScoreRecord r;
    r.model_id = j.at("model_id").get<std::string>();
    r.layer_id = j.at("layer_id").get<std::string>();
    r.layer_index = j.at("layer_index").get<std::int64_t>();
    r.target_id = j.at("target_id").get<std::string>();
    r.metric = parse_metric(j.at("metric").get<std::string>());
    r.score = number_from(j.at("score"));
    for (const auto &s : j.at("per_fold_scores"))
      r.per_fold_scores.push_back(number_from(s));
    r.components_used = j.at("components_used").get<std::vector<int>>();
    r.excluded = j.at("excluded").get<bool>();
    r.exclusion_reason = j.at("exclusion_reason").get<std::string>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    r.n_stimuli = j.at("n_stimuli").get<std::size_t>();
    r.units = j.at("units").get<std::size_t>();
    r.dropped_stimuli = j.at("dropped_stimuli").get<std::size_t>();
    r.k = j.at("k").get<int>();
    r.fold_seed = j.at("fold_seed").get<std::string>();
    r.resume_key = j.at("resume_key").get<std::string>();
    if (!r.excluded && !(std::abs(r.score) <= 1.0))
      throw Error(Errc::HeaderParse, "record score outside [-1, 1]");
    return r;
  } catch (const json::exception &e) {
    throw Error(Errc::HeaderParse, std::string("malformed score record: ") + e.what());
  } catch (const Error &e) {
    throw Error(Errc::HeaderParse, std::string("malformed score record: ") + e.what());
  }
}

void sort_canonical(std::vector<ScoreRecord> &records) {
  std::sort(records.begin(), records.end(), [](const auto &a, const auto &b) {
    return std::tie(a.model_id, a.layer_index, a.layer_id, a.target_id) <
           std::tie(b.model_id, b.layer_index, b.layer_id, b.target_id);
  });
}

void write_report(const SweepReport &report, const std::filesystem::path &dir) {
  std::filesystem::create_directories(dir);
  json prov = report.provenance;
  prov["format"] = kReportFormat;
  write_text(dir / kProvenanceFile, prov.dump(2) + "\n");

  auto records = report.records;
  sort_canonical(records);
  std::string lines;
  for (const auto &r : records)
    lines += to_json(r).dump() + "\n";
  write_text(dir / kRecordsFile, lines);
}

SweepReport load_report(const std::filesystem::path &dir) {
  SweepReport report;
  std::ifstream prov_in(dir / kProvenanceFile, std::ios::binary);
  if (!prov_in)
    throw Error(Errc::Io, "cannot open " + (dir / kProvenanceFile).string());
  try {
    report.provenance = json::parse(prov_in);
  } catch (const json::exception &e) {
    throw Error(Errc::HeaderParse, std::string("provenance: ") + e.what());
  }
  if (!report.provenance.is_object() || !report.provenance.contains("format") ||
      report.provenance["format"] != kReportFormat)
    throw Error(Errc::VersionMismatch,
                "report format is not " + std::string(kReportFormat));

  std::ifstream in(dir / kRecordsFile, std::ios::binary);
  if (!in)
    throw Error(Errc::Io, "cannot open " + (dir / kRecordsFile).string());
  std::set<std::tuple<std::string, std::string, std::string>> keys;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty())
      continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception &e) {
      throw Error(Errc::HeaderParse,
                  "records line " + std::to_string(line_no) + ": " + e.what());
    }
    auto r = record_from_json(j);
    if (!keys.emplace(r.model_id, r.layer_id, r.target_id).second)
      throw Error(Errc::HeaderParse, "duplicate record for " + r.model_id + "/" +
                                         r.layer_id + "/" + r.target_id);
    report.records.push_back(std::move(r));
  }
  return report;
}

} // namespace layerprobe
