#include "layerprobe/scorer.hpp"

#include "layerprobe/error.hpp"
#include "layerprobe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace layerprobe {

std::string_view to_string(Metric m) noexcept {
  return m == Metric::NeuralPearsonMedian ? "neural_pearson_median"
                                          : "scalar_spearman";
}

Metric parse_metric(std::string_view text) {
  if (text == "neural_pearson_median")
    return Metric::NeuralPearsonMedian;
  if (text == "scalar_spearman")
    return Metric::ScalarSpearman;
  throw Error(Errc::InvalidValue, "unknown metric '" + std::string(text) + "'");
}

Metric metric_for(const TargetSet &t) noexcept {
  return std::holds_alternative<NeuralTargets>(t) ? Metric::NeuralPearsonMedian
                                                  : Metric::ScalarSpearman;
}

namespace {

std::vector<Eigen::Index> rows_of(const std::vector<std::string> &ids,
                                  const std::map<std::string_view, Eigen::Index> &index) {
  std::vector<Eigen::Index> rows;
  rows.reserve(ids.size());
  for (const auto &id : ids)
    rows.push_back(index.at(id));
  return rows;
}

Eigen::MatrixXd target_matrix(const TargetSet &t) {
  return std::visit(
      [](const auto &v) -> Eigen::MatrixXd {
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, NeuralTargets>)
          return v.responses.template cast<double>();
        else
          return v.scores.template cast<double>();
      },
      t);
}

} // namespace

CrossValidation cross_validate(const ActivationMatrix &a, const TargetSet &t,
                               const FoldAssignment &folds, const PlsConfig &pls) {
  std::vector<std::string> ids = a.stimulus_ids;
  std::sort(ids.begin(), ids.end());
  std::vector<std::string> tids = stimulus_ids(t);
  std::sort(tids.begin(), tids.end());
  if (ids != tids)
    throw Error(Errc::InvalidValue,
                "activations and targets are not aligned to the same stimuli");

  std::map<std::string_view, Eigen::Index> act_row, tgt_row;
  for (std::size_t i = 0; i < a.stimulus_ids.size(); ++i)
    act_row.emplace(a.stimulus_ids[i], static_cast<Eigen::Index>(i));
  for (std::size_t i = 0; i < stimulus_ids(t).size(); ++i)
    tgt_row.emplace(stimulus_ids(t)[i], static_cast<Eigen::Index>(i));

  // Canonical row order, independent of the input row order.
  Eigen::MatrixXd X = a.values.cast<double>();
  X = X(rows_of(ids, act_row), Eigen::all).eval();
  CrossValidation cv;
  cv.actual = target_matrix(t);
  cv.actual = cv.actual(rows_of(ids, tgt_row), Eigen::all).eval();
  const Eigen::MatrixXd &Y = cv.actual;

  std::map<std::string_view, Eigen::Index> row_of;
  for (std::size_t i = 0; i < ids.size(); ++i)
    row_of.emplace(ids[i], static_cast<Eigen::Index>(i));
  const FoldAssignment restricted = restrict_to(folds, ids);

  cv.predictions = Eigen::MatrixXd::Zero(Y.rows(), Y.cols());
  cv.times_predicted = Eigen::VectorXi::Zero(Y.rows());
  for (int f = 0; f < restricted.k; ++f) {
    const auto split_ids = split(restricted, f);
    auto test = rows_of(split_ids.test, row_of);
    if (test.empty()) {
      cv.test_rows.push_back({});
      cv.components_used.push_back(0);
      continue;
    }
    const auto train = rows_of(split_ids.train, row_of);
    const Eigen::MatrixXd X_train = X(train, Eigen::all);
    const Eigen::MatrixXd Y_train = Y(train, Eigen::all);
    const auto model = pls_fit(X_train, Y_train, pls);
    const Eigen::MatrixXd Y_hat = pls_predict(model, X(test, Eigen::all));
    for (std::size_t i = 0; i < test.size(); ++i) {
      cv.predictions.row(test[i]) = Y_hat.row(static_cast<Eigen::Index>(i));
      ++cv.times_predicted(test[i]);
    }
    cv.components_used.push_back(model.components_used);
    cv.test_rows.push_back(std::move(test));
  }
  cv.stimulus_ids = std::move(ids);
  return cv;
}

ScoreRecord score_layer(const ActivationMatrix &a, const TargetSet &t,
                        const ScoreSpec &spec) {
  if (spec.metric != metric_for(t))
    throw Error(Errc::InvalidConfig, std::string("metric ") +
                                         std::string(to_string(spec.metric)) +
                                         " does not match target kind");
  ScoreRecord rec;
  rec.model_id = a.model_id;
  rec.layer_id = a.layer_id;
  rec.layer_index = a.layer_index;
  rec.target_id = target_id(t);
  rec.metric = spec.metric;
  rec.units = static_cast<std::size_t>(a.units());
  rec.n_stimuli = a.stimulus_ids.size();
  rec.k = spec.folds.k;
  rec.fold_seed = spec.folds.seed ? std::to_string(*spec.folds.seed) : "external";

  if (!filter_layer(a, spec.min_units)) {
    rec.excluded = true;
    rec.exclusion_reason = "min_units: layer has " + std::to_string(a.units()) +
                           " units, fewer than " + std::to_string(spec.min_units);
    return rec;
  }

  try {
    const auto cv = cross_validate(a, t, spec.folds, spec.pls);
    rec.components_used = cv.components_used;
    if ((cv.times_predicted.array() != 1).any())
      throw Error(Errc::MissingStimulus, "a stimulus was not held out exactly once");

    const double nan = std::numeric_limits<double>::quiet_NaN();
    double fold_sum = 0.0;
    std::size_t folds_used = 0;
    for (std::size_t f = 0; f < cv.test_rows.size(); ++f) {
      const auto &rows = cv.test_rows[f];
      const std::string tag = "fold " + std::to_string(f);
      if (rows.empty()) {
        rec.warnings.push_back(tag + " has no test stimuli");
        rec.per_fold_scores.push_back(nan);
        continue;
      }
      const Eigen::MatrixXd actual = cv.actual(rows, Eigen::all);
      const Eigen::MatrixXd predicted = cv.predictions(rows, Eigen::all);
      if (spec.metric == Metric::NeuralPearsonMedian) {
        const auto sp = site_predictivity(actual, predicted);
        if (sp.sites_degenerate > 0)
          rec.warnings.push_back(tag + ": " + std::to_string(sp.sites_degenerate) +
                                 " zero-variance site(s) excluded");
        rec.per_fold_scores.push_back(sp.value);
        fold_sum += sp.value;
        ++folds_used;
      } else {
        try {
          rec.per_fold_scores.push_back(spearman(actual.col(0), predicted.col(0)));
        } catch (const Error &) {
          rec.warnings.push_back(tag + ": spearman undefined");
          rec.per_fold_scores.push_back(nan);
        }
      }
    }

    if (spec.metric == Metric::NeuralPearsonMedian) {
      if (folds_used == 0)
        throw Error(Errc::InsufficientSamples, "no fold produced a score");
      rec.score = fold_sum / static_cast<double>(folds_used);
    } else {
      rec.score = spearman(cv.actual.col(0), cv.predictions.col(0));
    }
  } catch (const Error &e) {
    rec.excluded = true;
    rec.exclusion_reason = e.what();
    rec.score = std::numeric_limits<double>::quiet_NaN();
  }
  return rec;
}

} // namespace layerprobe
