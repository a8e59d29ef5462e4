#pragma once

#include "layerprobe/exchange.hpp"
#include "layerprobe/pls.hpp"
#include "layerprobe/splits.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace layerprobe {

enum class Metric {
  NeuralPearsonMedian, // per fold: median over sites of Pearson r; mean over folds
  ScalarSpearman,      // Spearman over held-out predictions pooled across folds
};

std::string_view to_string(Metric m) noexcept;
Metric parse_metric(std::string_view text);
Metric metric_for(const TargetSet &t) noexcept;

inline constexpr int kDefaultMinUnits = 24;

struct ScoreSpec {
  PlsConfig pls;
  FoldAssignment folds;
  Metric metric = Metric::NeuralPearsonMedian;
  int min_units = kDefaultMinUnits;
};

struct ScoreRecord {
  std::string model_id;
  std::string layer_id;
  std::int64_t layer_index = 0;
  std::string target_id;
  Metric metric = Metric::NeuralPearsonMedian;

  double score = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> per_fold_scores; // NaN where a fold was undefined
  std::vector<int> components_used;
  bool excluded = false;
  std::string exclusion_reason;
  std::vector<std::string> warnings;

  std::size_t n_stimuli = 0;
  std::size_t units = 0;
  std::size_t dropped_stimuli = 0;
  int k = 0;
  std::string fold_seed; // decimal seed or "external"
  std::string resume_key;
};

/// Held-out PLS predictions from k-fold cross-validation. Rows follow the
/// lexicographic order of stimulus ids.
struct CrossValidation {
  std::vector<std::string> stimulus_ids;
  Eigen::MatrixXd actual;      // n x q targets
  Eigen::MatrixXd predictions; // n x q, each row from the fold holding it out
  Eigen::VectorXi times_predicted;
  std::vector<std::vector<Eigen::Index>> test_rows; // per fold
  std::vector<int> components_used;                 // per fold
};

/// Fits on each fold's training rows and predicts its test rows. Folds must
/// cover every stimulus (MissingStimulus otherwise); empty folds are skipped.
CrossValidation cross_validate(const ActivationMatrix &a, const TargetSet &t,
                               const FoldAssignment &folds, const PlsConfig &pls);

/// Layers narrower than `min_units` are not scored.
inline bool filter_layer(const ActivationMatrix &a, int min_units) noexcept {
  return a.units() >= min_units;
}

/// Cross-validated predictivity of one layer for one target set. Rows of `a`
/// and `t` are matched by stimulus id, so their order does not matter, but
/// both must cover the same stimuli (see `align`). Data-dependent failures
/// (degenerate folds, zero variance, ...) produce an excluded record instead
/// of throwing; a metric that does not match the target kind throws.
ScoreRecord score_layer(const ActivationMatrix &a, const TargetSet &t,
                        const ScoreSpec &spec);

} // namespace layerprobe
