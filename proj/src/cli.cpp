#include "layerprobe/cli.hpp"

#include "layerprobe/checksum.hpp"
#include "layerprobe/config.hpp"
#include "layerprobe/exchange.hpp"
#include "layerprobe/meta.hpp"
#include "layerprobe/report.hpp"
#include "layerprobe/splits.hpp"
#include "layerprobe/sweep.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <ostream>

namespace layerprobe {

using nlohmann::json;
namespace fs = std::filesystem;

int exit_code_for(Errc code) noexcept {
  return code == Errc::InvalidConfig ? kExitValidation : kExitData;
}

namespace {

struct Options {
  std::string config;
  std::string out;
  int workers = 0;
  std::string mode;
  bool resume = false;
  std::string activation;
  std::string target;
  std::string report;
  std::string analysis;
  std::vector<std::string> files;
};

RunConfig config_with_overrides(const Options &o) {
  RunConfig cfg = load_run_config(o.config);
  if (!o.out.empty())
    cfg.output = o.out;
  if (o.workers > 0)
    cfg.workers = o.workers;
  if (!o.mode.empty())
    cfg.mode = parse_run_mode(o.mode);
  return cfg;
}

int cmd_score(const Options &o, std::ostream &out) {
  const RunConfig cfg = config_with_overrides(o);
  const std::string act_bytes = read_file(o.activation);
  auto decoded = decode_amx(act_bytes);
  auto *act = std::get_if<ActivationMatrix>(&decoded);
  if (!act)
    throw Error(Errc::InvalidValue, o.activation + " is not an activation file");

  const std::string tgt_bytes = read_file(o.target);
  const auto checksum = to_hex(fnv1a64(tgt_bytes));
  auto tdecoded = decode_amx(tgt_bytes);
  TargetSet targets;
  if (auto *n = std::get_if<NeuralTargets>(&tdecoded))
    targets = std::move(*n);
  else if (auto *s = std::get_if<ScalarTargets>(&tdecoded))
    targets = std::move(*s);
  else
    throw Error(Errc::InvalidValue, o.target + " is not a target file");

  const auto ctx = make_target_context(std::move(targets), checksum, cfg);
  auto rec = score_pair(*act, ctx, cfg);
  rec.resume_key = resume_key(to_hex(fnv1a64(act_bytes)), ctx);
  out << to_json(rec).dump() << '\n';
  return kExitOk;
}

int cmd_sweep(const Options &o, std::ostream &err) {
  RunConfig cfg = config_with_overrides(o);
  SweepOptions opts;
  opts.resume = o.resume;
  opts.progress = &err;
  const auto summary = run_sweep(cfg, opts);
  err << "sweep: " << summary.records << " records (" << summary.scored
      << " scored, " << summary.skipped << " resumed, " << summary.excluded
      << " excluded) -> " << cfg.output.string() << '\n';
  return kExitOk;
}

// ---- meta -----------------------------------------------------------------

std::map<std::string, double> model_values_from(const json &a, const fs::path &base) {
  std::map<std::string, double> values;
  auto read_map = [&](const json &obj) {
    if (!obj.is_object())
      throw Error(Errc::InvalidConfig, "model values must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (!it.value().is_number())
        throw Error(Errc::InvalidConfig, "model value for " + it.key() + " is not a number");
      values[it.key()] = it.value().get<double>();
    }
  };
  if (a.contains("model_values")) {
    read_map(a["model_values"]);
  } else if (a.contains("model_values_file")) {
    json j;
    try {
      j = json::parse(read_file(base / a["model_values_file"].get<std::string>()));
    } catch (const json::exception &e) {
      throw Error(Errc::HeaderParse, e.what());
    }
    read_map(j);
  } else if (a.contains("predictions")) {
    // Held-out predictions per model (e.g. fine-tuned networks); the score is
    // the Spearman against the ground truth.
    const auto &p = a["predictions"];
    const auto truth_m = read_matrix(base / p.at("truth").get<std::string>());
    const auto *truth = std::get_if<ScalarTargets>(&truth_m);
    if (!truth)
      throw Error(Errc::InvalidValue, "prediction truth must be scalar targets");
    for (auto it = p.at("models").begin(); it != p.at("models").end(); ++it) {
      const auto pm = read_matrix(base / it.value().get<std::string>());
      const auto *pred = std::get_if<ScalarTargets>(&pm);
      if (!pred)
        throw Error(Errc::InvalidValue, "predictions for " + it.key() +
                                            " must be scalar targets");
      values[it.key()] = prediction_accuracy(*truth, *pred).rho;
    }
  } else {
    throw Error(Errc::InvalidConfig,
                "analysis needs model_values, model_values_file or predictions");
  }
  return values;
}

json run_analysis(const SweepReport &report, const json &a, const fs::path &base,
                  const fs::path &out_dir, std::size_t index) {
  if (!a.is_object() || !a.contains("type") || !a["type"].is_string())
    throw Error(Errc::InvalidConfig, "analysis needs a string 'type'");
  const auto type = a["type"].get<std::string>();
  const auto name = a.value("name", type + "_" + std::to_string(index));
  auto str = [&](const char *key) {
    if (!a.contains(key) || !a[key].is_string())
      throw Error(Errc::InvalidConfig, "analysis '" + name + "' needs '" + key + "'");
    return a[key].get<std::string>();
  };

  MetaResult result;
  json extra = json::object();
  if (type == "pair_scores") {
    result = pair_scores(report, str("x_target"), str("y_target"));
  } else if (type == "penultimate" || type == "best_layer") {
    const auto target = str("target");
    const auto sel = type == "penultimate" ? penultimate_scores(report, target)
                                           : best_layer_scores(report, target);
    const auto y = model_values_from(a, base);
    result = model_level_correlation(sel.score, y,
                                     target + " at " + type + " layer vs model values");
    for (auto &pt : result.scatter)
      pt.layer_id = sel.layer.at(pt.model_id);
    extra["selected_layers"] = sel.layer;
    extra["skipped_models"] = sel.skipped;
  } else if (type == "model_level") {
    if (!a.contains("x") || !a.contains("y"))
      throw Error(Errc::InvalidConfig, "model_level analysis needs 'x' and 'y'");
    result = model_level_correlation(model_values_from(a["x"], base),
                                     model_values_from(a["y"], base));
  } else {
    throw Error(Errc::InvalidConfig, "unknown analysis type '" + type + "'");
  }

  json j = to_json(result);
  j["name"] = name;
  j["type"] = type;
  if (!extra.empty())
    j["details"] = extra;

  fs::create_directories(out_dir);
  std::ofstream(out_dir / (name + ".json"), std::ios::binary | std::ios::trunc)
      << j.dump(2) << '\n';
  std::ofstream(out_dir / (name + "_scatter.csv"), std::ios::binary | std::ios::trunc)
      << scatter_csv(result);
  return j;
}

int cmd_meta(const Options &o, std::ostream &out) {
  const SweepReport report = load_report(o.report);
  if (report.records.empty())
    throw Error(Errc::NoRecords, "report " + o.report + " has no records");

  json spec;
  try {
    spec = json::parse(read_file(o.analysis));
  } catch (const json::exception &e) {
    throw Error(Errc::InvalidConfig, e.what());
  } catch (const Error &e) {
    throw Error(Errc::InvalidConfig, e.what());
  }
  const fs::path base = fs::path(o.analysis).parent_path();
  const fs::path out_dir = o.out.empty() ? fs::path(o.report) / "meta" : fs::path(o.out);

  json analyses = spec.contains("analyses") ? spec["analyses"] : json::array({spec});
  if (!analyses.is_array())
    throw Error(Errc::InvalidConfig, "'analyses' must be an array");
  json results = json::array();
  for (std::size_t i = 0; i < analyses.size(); ++i)
    results.push_back(run_analysis(report, analyses[i], base, out_dir, i));
  out << results.dump(2) << '\n';
  return kExitOk;
}

// ---- validate -------------------------------------------------------------

std::string describe(const AnyMatrix &m) {
  return std::visit(
      [](const auto &v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ActivationMatrix>)
          return "activation " + v.model_id + "/" + v.layer_id + " " +
                 std::to_string(v.values.rows()) + "x" + std::to_string(v.values.cols());
        else if constexpr (std::is_same_v<T, NeuralTargets>)
          return "neural " + std::string(to_string(v.region)) + " " +
                 std::to_string(v.responses.rows()) + "x" +
                 std::to_string(v.responses.cols());
        else
          return "scalar " + v.name + " n=" + std::to_string(v.scores.size());
      },
      m);
}

std::string validate_one(const fs::path &path) {
  const std::string bytes = read_file(path);
  if (bytes.rfind("AMX1", 0) == 0 || bytes.size() < 2 || bytes[0] != '{')
    return describe(decode_amx(bytes));

  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::exception &e) {
    throw Error(Errc::HeaderParse, e.what());
  }
  if (j.contains("entries")) {
    const auto m = load_manifest(path, /*verify=*/true);
    for (const auto &e : m.entries) {
      if (e.kind == EntryKind::Folds)
        load_folds(m.resolve(e));
      else
        read_matrix(m.resolve(e));
    }
    return "manifest " + m.dataset_id + " (" + std::to_string(m.entries.size()) +
           " entries)";
  }
  if (j.contains("assignment")) {
    const auto fa = parse_folds(bytes);
    return "folds k=" + std::to_string(fa.k) + " n=" +
           std::to_string(fa.assignment.size());
  }
  const auto cfg = parse_run_config(bytes, path.parent_path());
  return "run config (" + std::to_string(cfg.targets.size()) + " targets)";
}

int cmd_validate(const Options &o, std::ostream &out) {
  int code = kExitOk;
  for (const auto &f : o.files) {
    try {
      const auto summary = validate_one(f);
      out << "OK   " << f << ": " << summary << '\n';
    } catch (const Error &e) {
      out << "FAIL " << f << ": " << e.what() << '\n';
      if (code == kExitOk)
        code = exit_code_for(e.code());
    }
  }
  return code;
}

} // namespace

int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
  CLI::App app{"Cross-validated layer predictivity scoring and meta-analysis"};
  app.require_subcommand(1);
  Options o;

  auto *score = app.add_subcommand("score", "Score one layer against one target file");
  score->add_option("--config", o.config, "Run configuration (JSON)")->required();
  score->add_option("--activation", o.activation, "Activation AMX file")->required();
  score->add_option("--target", o.target, "Target AMX file (neural or scalar)")->required();

  auto *sweep = app.add_subcommand("sweep", "Score every layer in a manifest");
  sweep->add_option("--config", o.config, "Run configuration (JSON)")->required();
  sweep->add_option("--out", o.out, "Output directory (overrides config)");
  sweep->add_option("--workers", o.workers, "Worker threads in parallel mode")
      ->check(CLI::PositiveNumber);
  sweep->add_option("--mode", o.mode, "reference or parallel")
      ->check(CLI::IsMember({"reference", "parallel"}));
  sweep->add_flag("--resume", o.resume, "Reuse records whose inputs are unchanged");

  auto *meta = app.add_subcommand("meta", "Run meta-analyses over a sweep report");
  meta->add_option("--report", o.report, "Sweep report directory")->required();
  meta->add_option("--analysis", o.analysis, "Analysis spec (JSON)")->required();
  meta->add_option("--out", o.out, "Output directory (default <report>/meta)");

  auto *validate = app.add_subcommand("validate", "Check AMX, manifest, fold and config files");
  validate->add_option("files", o.files, "Files to check")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*score)
      return cmd_score(o, out);
    if (*sweep)
      return cmd_sweep(o, err);
    if (*meta)
      return cmd_meta(o, out);
    return cmd_validate(o, out);
  } catch (const Error &e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const json::exception &e) {
    err << "error: malformed input: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception &e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

} // namespace layerprobe
