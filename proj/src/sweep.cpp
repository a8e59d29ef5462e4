#include "layerprobe/sweep.hpp"

#include "layerprobe/checksum.hpp"
#include "layerprobe/error.hpp"

#include <atomic>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

namespace layerprobe {

using nlohmann::json;

TargetContext make_target_context(TargetSet targets, std::string checksum,
                                  const RunConfig &cfg) {
  TargetContext ctx;
  ctx.metric = metric_for(targets);
  ctx.checksum = std::move(checksum);
  const auto id = target_id(targets);
  ctx.targets = std::move(targets);

  json spec = {{"pls",
                {{"components", cfg.pls.n_components},
                 {"scale", cfg.pls.scale},
                 {"max_iter", cfg.pls.max_iter},
                 {"tol", cfg.pls.tol}}},
               {"min_units", cfg.min_units},
               {"metric", to_string(ctx.metric)},
               {"format", kReportFormat}};
  if (auto it = cfg.cv.fold_files.find(id); it != cfg.cv.fold_files.end()) {
    ctx.external_folds = load_folds(it->second);
    ctx.k = ctx.external_folds->k;
    spec["folds"] = {{"external", to_hex(file_checksum(it->second))}};
  } else {
    ctx.k = cfg.cv.folds_for(ctx.metric);
    spec["folds"] = {{"k", ctx.k}, {"seed", cfg.cv.seed}, {"prng", kFoldPrng}};
  }
  ctx.spec_hash = to_hex(fnv1a64(spec.dump()));
  return ctx;
}

std::string resume_key(const std::string &activation_checksum,
                       const TargetContext &target) {
  return to_hex(fnv1a64(activation_checksum + "|" + target.checksum + "|" +
                        target.spec_hash));
}

ScoreRecord score_pair(const ActivationMatrix &a, const TargetContext &target,
                       const RunConfig &cfg) {
  try {
    auto aligned = align(a, target.targets);
    ScoreSpec spec{cfg.pls, {}, target.metric, cfg.min_units};
    if (target.external_folds) {
      spec.folds = *target.external_folds;
    } else if (filter_layer(aligned.activations, cfg.min_units)) {
      spec.folds = make_folds(aligned.activations.stimulus_ids, target.k, cfg.cv.seed);
    } else {
      spec.folds.k = target.k;
      spec.folds.seed = cfg.cv.seed;
    }
    auto rec = score_layer(aligned.activations, aligned.targets, spec);
    rec.dropped_stimuli = aligned.dropped_activation_rows;
    return rec;
  } catch (const Error &e) {
    ScoreRecord rec;
    rec.model_id = a.model_id;
    rec.layer_id = a.layer_id;
    rec.layer_index = a.layer_index;
    rec.target_id = target_id(target.targets);
    rec.metric = target.metric;
    rec.units = static_cast<std::size_t>(a.units());
    rec.n_stimuli = a.stimulus_ids.size();
    rec.k = target.k;
    rec.fold_seed = target.external_folds ? "external" : std::to_string(cfg.cv.seed);
    rec.excluded = true;
    rec.exclusion_reason = e.what();
    return rec;
  }
}

namespace {

std::vector<TargetContext> load_targets(const Manifest &manifest,
                                        const RunConfig &cfg) {
  std::map<std::string, TargetContext> by_id;
  for (const auto &entry : manifest.entries) {
    if (entry.kind != EntryKind::Neural && entry.kind != EntryKind::Scalar)
      continue;
    const auto path = manifest.resolve(entry);
    const std::string bytes = read_file(path);
    Fnv1a64 h;
    h.update(bytes);
    const auto checksum = to_hex(h.digest());
    if (checksum != entry.checksum)
      throw Error(Errc::ChecksumMismatch, "target file " + entry.path);
    const auto decoded = decode_amx(bytes);
    TargetSet t;
    if (const auto *n = std::get_if<NeuralTargets>(&decoded))
      t = *n;
    else if (const auto *s = std::get_if<ScalarTargets>(&decoded))
      t = *s;
    else
      throw Error(Errc::InvalidValue, entry.path + " is not a target file");
    const auto id = target_id(t);
    if (std::find(cfg.targets.begin(), cfg.targets.end(), id) == cfg.targets.end())
      continue;
    if (by_id.count(id))
      throw Error(Errc::InvalidValue, "manifest has two files for target " + id);
    by_id.emplace(id, make_target_context(std::move(t), checksum, cfg));
  }
  std::vector<TargetContext> out;
  for (const auto &id : cfg.targets) {
    auto it = by_id.find(id);
    if (it == by_id.end())
      throw Error(Errc::InvalidConfig, "target '" + id + "' not found in manifest");
    out.push_back(std::move(it->second));
  }
  return out;
}

ScoreRecord unreadable_record(const ManifestEntry &entry, const TargetContext &t,
                              const std::string &reason) {
  ScoreRecord rec;
  rec.layer_id = entry.path;
  rec.layer_index = -1;
  rec.target_id = target_id(t.targets);
  rec.metric = t.metric;
  rec.k = t.k;
  rec.excluded = true;
  rec.exclusion_reason = reason;
  return rec;
}

} // namespace

SweepSummary run_sweep(const RunConfig &cfg, const SweepOptions &opts) {
  if (cfg.manifest.empty())
    throw Error(Errc::InvalidConfig, "sweep needs a manifest");
  if (cfg.targets.empty())
    throw Error(Errc::InvalidConfig, "sweep needs at least one target");
  const Manifest manifest = load_manifest(cfg.manifest, /*verify=*/false);
  const auto targets = load_targets(manifest, cfg);

  std::vector<const ManifestEntry *> layers;
  for (const auto &e : manifest.entries)
    if (e.kind == EntryKind::Activation)
      layers.push_back(&e);
  if (layers.empty())
    throw Error(Errc::NoRecords, "manifest lists no activation files");

  std::map<std::string, ScoreRecord> previous;
  if (opts.resume && std::filesystem::exists(cfg.output / kRecordsFile)) {
    for (auto &r : load_report(cfg.output).records)
      if (!r.resume_key.empty())
        previous.emplace(r.resume_key, std::move(r));
  }

  std::vector<std::vector<ScoreRecord>> results(layers.size());
  std::atomic<std::size_t> next{0}, done{0}, skipped{0};
  std::mutex progress_mutex;

  auto work = [&] {
    for (std::size_t i = next++; i < layers.size(); i = next++) {
      const auto &entry = *layers[i];
      auto &out = results[i];
      std::string bytes, checksum, failure;
      try {
        bytes = read_file(manifest.resolve(entry));
        Fnv1a64 h;
        h.update(bytes);
        checksum = to_hex(h.digest());
        if (checksum != entry.checksum)
          failure = "ChecksumMismatch: activation file differs from manifest";
      } catch (const Error &e) {
        failure = e.what();
      }

      std::optional<ActivationMatrix> act;
      for (const auto &t : targets) {
        const auto key = checksum.empty() ? std::string() : resume_key(checksum, t);
        if (auto it = previous.find(key); !key.empty() && it != previous.end()) {
          out.push_back(it->second);
          ++skipped;
          continue;
        }
        if (failure.empty() && !act) {
          try {
            act = std::get<ActivationMatrix>(decode_amx(bytes));
          } catch (const std::bad_variant_access &) {
            failure = "InvalidValue: " + entry.path + " is not an activation file";
          } catch (const Error &e) {
            failure = e.what();
          }
        }
        ScoreRecord rec = failure.empty() ? score_pair(*act, t, cfg)
                                          : unreadable_record(entry, t, failure);
        rec.resume_key = key;
        out.push_back(std::move(rec));
      }

      const auto finished = ++done;
      if (opts.progress) {
        std::lock_guard lock(progress_mutex);
        *opts.progress << "[" << finished << "/" << layers.size() << "] "
                       << entry.path;
        for (const auto &r : out) {
          *opts.progress << "  " << r.target_id << "=";
          if (r.excluded)
            *opts.progress << "excluded";
          else
            *opts.progress << r.score;
        }
        *opts.progress << '\n';
      }
    }
  };

  const int workers = cfg.mode == RunMode::Reference ? 1 : std::max(cfg.workers, 1);
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back(work);
  }

  SweepReport report;
  for (auto &per_layer : results)
    for (auto &r : per_layer)
      report.records.push_back(std::move(r));
  sort_canonical(report.records);

  json target_info = json::object();
  for (const auto &t : targets)
    target_info[target_id(t.targets)] = {
        {"checksum", t.checksum},
        {"metric", to_string(t.metric)},
        {"k", t.k},
        {"folds", t.external_folds ? "external" : "seeded"},
        {"spec_hash", t.spec_hash}};
  report.provenance = {
      {"dataset_id", manifest.dataset_id},
      {"spec", spec_snapshot(cfg)},
      {"targets", target_info},
      {"amx_format", "AMX1"},
      {"checksum", Fnv1a64::name},
      {"fold_prng", kFoldPrng},
      {"fold_shuffle", kFoldShuffle},
      {"aggregation",
       {{"neural_pearson_median",
         "per fold: median over recording sites of Pearson r (zero-variance "
         "sites dropped); score: mean over folds; no ceiling normalization"},
        {"scalar_spearman",
         "held-out predictions pooled across folds, one Spearman over all "
         "stimuli; per-fold Spearman recorded"}}},
      {"p_value", "Student-t approximation, two-sided"},
  };

  std::filesystem::create_directories(cfg.output);
  write_report(report, cfg.output);
  if (!cfg.source_text.empty()) {
    std::ofstream copy(cfg.output / "run_config.json", std::ios::binary | std::ios::trunc);
    copy << cfg.source_text;
  }

  SweepSummary summary;
  summary.records = report.records.size();
  summary.skipped = skipped.load();
  for (const auto &r : report.records)
    summary.excluded += r.excluded ? 1 : 0;
  summary.scored = summary.records - summary.skipped;
  return summary;
}

} // namespace layerprobe
