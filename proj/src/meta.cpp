#include "layerprobe/meta.hpp"

#include "layerprobe/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <tuple>

namespace layerprobe {

using nlohmann::json;

MetaResult pair_scores(const SweepReport &report, const std::string &target_a,
                       const std::string &target_b) {
  using Key = std::pair<std::string, std::string>;
  std::map<Key, const ScoreRecord *> a_scores, b_scores;
  for (const auto &r : report.records) {
    if (r.excluded)
      continue;
    if (r.target_id == target_a)
      a_scores.emplace(Key{r.model_id, r.layer_id}, &r);
    if (r.target_id == target_b)
      b_scores.emplace(Key{r.model_id, r.layer_id}, &r);
  }

  MetaResult out;
  out.pairing = target_a + " vs " + target_b + " (layer-wise)";
  for (const auto &[key, ra] : a_scores) {
    auto it = b_scores.find(key);
    if (it != b_scores.end())
      out.scatter.push_back({ra->score, it->second->score, key.first, key.second});
  }
  if (out.scatter.empty())
    throw Error(Errc::NoOverlap, "no layer scored for both " + target_a +
                                     " and " + target_b);
  Eigen::VectorXd x(static_cast<Eigen::Index>(out.scatter.size()));
  Eigen::VectorXd y(x.size());
  for (std::size_t i = 0; i < out.scatter.size(); ++i) {
    x(static_cast<Eigen::Index>(i)) = out.scatter[i].x;
    y(static_cast<Eigen::Index>(i)) = out.scatter[i].y;
  }
  out.result = correlation_test(x, y, CorrelationMethod::Spearman);
  return out;
}

std::string penultimate_layer(std::span<const std::string> ordered_layers) {
  if (ordered_layers.size() < 2)
    throw Error(Errc::TooFewLayers, "penultimate layer needs at least 2 layers");
  return ordered_layers[ordered_layers.size() - 2];
}

std::vector<std::string> model_layers(const SweepReport &report,
                                      const std::string &model_id) {
  std::set<std::pair<std::int64_t, std::string>> layers;
  for (const auto &r : report.records)
    if (r.model_id == model_id)
      layers.emplace(r.layer_index, r.layer_id);
  std::vector<std::string> out;
  out.reserve(layers.size());
  for (const auto &[idx, id] : layers)
    out.push_back(id);
  return out;
}

std::vector<std::string> model_ids(const SweepReport &report) {
  std::set<std::string> ids;
  for (const auto &r : report.records)
    ids.insert(r.model_id);
  return {ids.begin(), ids.end()};
}

BestLayer best_layer(const SweepReport &report, const std::string &model_id,
                     const std::string &target_id) {
  const ScoreRecord *best = nullptr;
  for (const auto &r : report.records) {
    if (r.excluded || r.model_id != model_id || r.target_id != target_id)
      continue;
    if (!best || r.score > best->score ||
        (r.score == best->score &&
         std::tie(r.layer_index, r.layer_id) < std::tie(best->layer_index, best->layer_id)))
      best = &r;
  }
  if (!best)
    throw Error(Errc::NoRecords, "no usable records for " + model_id + "/" + target_id);
  return {best->layer_id, best->score};
}

ModelSelection penultimate_scores(const SweepReport &report,
                                  const std::string &target_id) {
  ModelSelection out;
  for (const auto &model : model_ids(report)) {
    const auto layers = model_layers(report, model);
    if (layers.size() < 2) {
      out.skipped.push_back(model);
      continue;
    }
    const auto layer = penultimate_layer(layers);
    auto it = std::find_if(report.records.begin(), report.records.end(),
                           [&](const ScoreRecord &r) {
                             return r.model_id == model && r.layer_id == layer &&
                                    r.target_id == target_id && !r.excluded;
                           });
    if (it == report.records.end()) {
      out.skipped.push_back(model);
      continue;
    }
    out.score[model] = it->score;
    out.layer[model] = layer;
  }
  return out;
}

ModelSelection best_layer_scores(const SweepReport &report,
                                 const std::string &target_id) {
  ModelSelection out;
  for (const auto &model : model_ids(report)) {
    try {
      const auto best = best_layer(report, model, target_id);
      out.score[model] = best.score;
      out.layer[model] = best.layer_id;
    } catch (const Error &e) {
      if (e.code() != Errc::NoRecords)
        throw;
      out.skipped.push_back(model);
    }
  }
  return out;
}

MetaResult model_level_correlation(const std::map<std::string, double> &x,
                                   const std::map<std::string, double> &y,
                                   const std::string &pairing) {
  MetaResult out;
  out.pairing = pairing.empty() ? "model-level" : pairing;
  for (const auto &[model, xv] : x) {
    auto it = y.find(model);
    if (it != y.end())
      out.scatter.push_back({xv, it->second, model, ""});
  }
  if (out.scatter.size() < 3)
    throw Error(Errc::InsufficientSamples,
                "model-level correlation needs >= 3 shared models, have " +
                    std::to_string(out.scatter.size()));
  Eigen::VectorXd xs(static_cast<Eigen::Index>(out.scatter.size()));
  Eigen::VectorXd ys(xs.size());
  for (std::size_t i = 0; i < out.scatter.size(); ++i) {
    xs(static_cast<Eigen::Index>(i)) = out.scatter[i].x;
    ys(static_cast<Eigen::Index>(i)) = out.scatter[i].y;
  }
  out.result = correlation_test(xs, ys, CorrelationMethod::Spearman);
  return out;
}

CorrelationResult prediction_accuracy(const ScalarTargets &truth,
                                      const ScalarTargets &predicted) {
  std::map<std::string_view, float> pred;
  for (std::size_t i = 0; i < predicted.stimulus_ids.size(); ++i)
    pred.emplace(predicted.stimulus_ids[i], predicted.scores(static_cast<Eigen::Index>(i)));
  std::vector<std::pair<double, double>> pairs;
  for (std::size_t i = 0; i < truth.stimulus_ids.size(); ++i) {
    auto it = pred.find(truth.stimulus_ids[i]);
    if (it != pred.end())
      pairs.emplace_back(truth.scores(static_cast<Eigen::Index>(i)), it->second);
  }
  if (pairs.empty())
    throw Error(Errc::EmptyIntersection, "predictions share no stimuli with truth");
  Eigen::VectorXd t(static_cast<Eigen::Index>(pairs.size())), p(t.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    t(static_cast<Eigen::Index>(i)) = pairs[i].first;
    p(static_cast<Eigen::Index>(i)) = pairs[i].second;
  }
  return correlation_test(t, p, CorrelationMethod::Spearman);
}

json to_json(const CorrelationResult &r) {
  return {{"rho", r.rho},
          {"n", r.n},
          {"p_value", r.p_value},
          {"method", to_string(r.method)},
          {"p_value_method", "student-t approximation, two-sided"}};
}

json to_json(const MetaResult &m) {
  json scatter = json::array();
  for (const auto &pt : m.scatter)
    scatter.push_back(
        {{"x", pt.x}, {"y", pt.y}, {"model_id", pt.model_id}, {"layer_id", pt.layer_id}});
  return {{"pairing", m.pairing}, {"result", to_json(m.result)}, {"scatter", scatter}};
}

namespace {

std::string csv_field(const std::string &s) {
  if (s.find_first_of(",\"\n") == std::string::npos)
    return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"')
      out += '"';
    out += c;
  }
  return out + "\"";
}

} // namespace

std::string scatter_csv(const MetaResult &m) {
  std::ostringstream out;
  out.precision(17);
  out << "x,y,model_id,layer_id\n";
  for (const auto &pt : m.scatter)
    out << pt.x << ',' << pt.y << ',' << csv_field(pt.model_id) << ','
        << csv_field(pt.layer_id) << '\n';
  return out.str();
}

} // namespace layerprobe
