#pragma once

#include "layerprobe/exchange.hpp"
#include "layerprobe/metrics.hpp"
#include "layerprobe/report.hpp"

#include <json.hpp>

#include <map>
#include <span>
#include <string>
#include <vector>

namespace layerprobe {

struct ScatterPoint {
  double x = 0.0;
  double y = 0.0;
  std::string model_id;
  std::string layer_id;
};

struct MetaResult {
  std::string pairing;
  CorrelationResult result;
  std::vector<ScatterPoint> scatter;
};

/// Layer-wise pairing of two targets: inner join of the non-excluded records
/// on (model_id, layer_id), Spearman test over the paired scores.
MetaResult pair_scores(const SweepReport &report, const std::string &target_a,
                       const std::string &target_b);

/// Layer immediately before the last one in declared order.
std::string penultimate_layer(std::span<const std::string> ordered_layers);

/// Distinct layers of a model (any target, excluded or not) by layer_index.
std::vector<std::string> model_layers(const SweepReport &report,
                                      const std::string &model_id);

std::vector<std::string> model_ids(const SweepReport &report);

struct BestLayer {
  std::string layer_id;
  double score = 0.0;
};

/// Highest-scoring non-excluded layer; ties go to the smallest layer_index.
BestLayer best_layer(const SweepReport &report, const std::string &model_id,
                     const std::string &target_id);

struct ModelSelection {
  std::map<std::string, double> score;       // model -> selected layer score
  std::map<std::string, std::string> layer;  // model -> selected layer
  std::vector<std::string> skipped;          // models without a usable layer
};

/// Per model, the target score at its penultimate layer.
ModelSelection penultimate_scores(const SweepReport &report,
                                  const std::string &target_id);
/// Per model, the best score over its layers.
ModelSelection best_layer_scores(const SweepReport &report,
                                 const std::string &target_id);

/// Spearman test across the models present in both maps (at least 3).
MetaResult model_level_correlation(const std::map<std::string, double> &x,
                                   const std::map<std::string, double> &y,
                                   const std::string &pairing = "");

/// Spearman between ground-truth scalar scores and a model's predictions for
/// the same stimuli (matched by id).
CorrelationResult prediction_accuracy(const ScalarTargets &truth,
                                      const ScalarTargets &predicted);

nlohmann::json to_json(const CorrelationResult &r);
nlohmann::json to_json(const MetaResult &m);
/// CSV with header `x,y,model_id,layer_id`.
std::string scatter_csv(const MetaResult &m);

} // namespace layerprobe
