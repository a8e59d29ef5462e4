#pragma once

#include "layerprobe/config.hpp"
#include "layerprobe/exchange.hpp"
#include "layerprobe/report.hpp"
#include "layerprobe/scorer.hpp"

#include <iosfwd>
#include <optional>
#include <string>

namespace layerprobe {

/// Everything needed to score any layer against one target set.
struct TargetContext {
  TargetSet targets;
  std::string checksum; // of the target file
  Metric metric = Metric::NeuralPearsonMedian;
  int k = 0;
  std::optional<FoldAssignment> external_folds;
  std::string spec_hash;
};

/// Loads a target file and resolves its CV settings from the config.
TargetContext make_target_context(TargetSet targets, std::string checksum,
                                  const RunConfig &cfg);

std::string resume_key(const std::string &activation_checksum,
                       const TargetContext &target);

/// Aligns, builds folds and scores. Never throws on data problems: they come
/// back as an excluded record.
ScoreRecord score_pair(const ActivationMatrix &a, const TargetContext &target,
                       const RunConfig &cfg);

struct SweepOptions {
  bool resume = false;
  std::ostream *progress = nullptr;
};

struct SweepSummary {
  std::size_t records = 0;
  std::size_t scored = 0;
  std::size_t skipped = 0;
  std::size_t excluded = 0;
};

/// Scores every activation entry of the manifest against every configured
/// target and writes the report to cfg.output. With `resume`, records of a
/// previous report whose resume key (activation checksum, target checksum,
/// spec hash) still matches are carried over instead of being recomputed.
SweepSummary run_sweep(const RunConfig &cfg, const SweepOptions &opts = {});

} // namespace layerprobe
