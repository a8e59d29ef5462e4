#include "layerprobe/config.hpp"

#include "layerprobe/error.hpp"
#include "layerprobe/exchange.hpp"

#include <algorithm>
#include <initializer_list>
#include <limits>
#include <set>

namespace layerprobe {

using nlohmann::json;

std::string_view to_string(RunMode m) noexcept {
  return m == RunMode::Reference ? "reference" : "parallel";
}

RunMode parse_run_mode(std::string_view text) {
  if (text == "reference")
    return RunMode::Reference;
  if (text == "parallel")
    return RunMode::Parallel;
  throw Error(Errc::InvalidConfig, "mode must be 'reference' or 'parallel'");
}

namespace {

void only_keys(const json &obj, std::string_view where,
               std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object())
    throw Error(Errc::InvalidConfig, std::string(where) + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw Error(Errc::InvalidConfig,
                  "unknown key '" + it.key() + "' in " + std::string(where));
}

int get_int(const json &v, std::string_view what, std::int64_t lo) {
  if (!v.is_number_integer())
    throw Error(Errc::InvalidConfig, std::string(what) + " must be an integer");
  const auto x = v.get<std::int64_t>();
  if (x < lo || x > std::numeric_limits<int>::max())
    throw Error(Errc::InvalidConfig,
                std::string(what) + " must be >= " + std::to_string(lo));
  return static_cast<int>(x);
}

std::string get_string(const json &v, std::string_view what) {
  if (!v.is_string())
    throw Error(Errc::InvalidConfig, std::string(what) + " must be a string");
  return v.get<std::string>();
}

} // namespace

RunConfig parse_run_config(std::string_view text,
                           const std::filesystem::path &base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception &e) {
    throw Error(Errc::InvalidConfig, e.what());
  }
  only_keys(j, "config", {"manifest", "targets", "pls", "cv", "min_units",
                          "output", "workers", "mode"});

  RunConfig cfg;
  cfg.source_text = std::string(text);
  if (j.contains("manifest"))
    cfg.manifest = base_dir / get_string(j["manifest"], "manifest");
  if (j.contains("targets")) {
    if (!j["targets"].is_array())
      throw Error(Errc::InvalidConfig, "targets must be an array of ids");
    std::set<std::string> seen;
    for (const auto &t : j["targets"]) {
      auto id = get_string(t, "target id");
      if (!seen.insert(id).second)
        throw Error(Errc::InvalidConfig, "duplicate target '" + id + "'");
      cfg.targets.push_back(std::move(id));
    }
  }
  if (j.contains("pls")) {
    const auto &p = j["pls"];
    only_keys(p, "pls", {"components", "scale", "max_iter", "tol"});
    if (p.contains("components"))
      cfg.pls.n_components = get_int(p["components"], "pls.components", 1);
    if (p.contains("max_iter"))
      cfg.pls.max_iter = get_int(p["max_iter"], "pls.max_iter", 1);
    if (p.contains("scale")) {
      if (!p["scale"].is_boolean())
        throw Error(Errc::InvalidConfig, "pls.scale must be a boolean");
      cfg.pls.scale = p["scale"].get<bool>();
    }
    if (p.contains("tol")) {
      if (!p["tol"].is_number())
        throw Error(Errc::InvalidConfig, "pls.tol must be a number");
      cfg.pls.tol = p["tol"].get<double>();
    }
    cfg.pls.validate();
  }
  if (j.contains("cv")) {
    const auto &c = j["cv"];
    only_keys(c, "cv", {"k", "seed", "fold_files"});
    if (c.contains("k"))
      cfg.cv.k = get_int(c["k"], "cv.k", 2);
    if (c.contains("seed")) {
      if (!c["seed"].is_number_unsigned())
        throw Error(Errc::InvalidConfig, "cv.seed must be a non-negative integer");
      cfg.cv.seed = c["seed"].get<std::uint64_t>();
    }
    if (c.contains("fold_files")) {
      if (!c["fold_files"].is_object())
        throw Error(Errc::InvalidConfig, "cv.fold_files must map target id to path");
      for (auto it = c["fold_files"].begin(); it != c["fold_files"].end(); ++it)
        cfg.cv.fold_files[it.key()] = base_dir / get_string(it.value(), "fold file");
    }
  }
  if (j.contains("min_units"))
    cfg.min_units = get_int(j["min_units"], "min_units", 1);
  if (j.contains("output"))
    cfg.output = base_dir / get_string(j["output"], "output");
  if (j.contains("workers"))
    cfg.workers = get_int(j["workers"], "workers", 1);
  if (j.contains("mode"))
    cfg.mode = parse_run_mode(get_string(j["mode"], "mode"));
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path &path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error &e) {
    // An unreadable config is a configuration problem, not a data problem.
    throw Error(Errc::InvalidConfig, e.what());
  }
  return parse_run_config(text, path.parent_path());
}

json spec_snapshot(const RunConfig &cfg) {
  json fold_files = json::object();
  for (const auto &[target, path] : cfg.cv.fold_files)
    fold_files[target] = path.filename().string();
  return {
      {"targets", cfg.targets},
      {"pls",
       {{"components", cfg.pls.n_components},
        {"scale", cfg.pls.scale},
        {"max_iter", cfg.pls.max_iter},
        {"tol", cfg.pls.tol}}},
      {"cv",
       {{"k", cfg.cv.k ? json(*cfg.cv.k) : json(nullptr)},
        {"k_neural", cfg.cv.folds_for(Metric::NeuralPearsonMedian)},
        {"k_scalar", cfg.cv.folds_for(Metric::ScalarSpearman)},
        {"seed", cfg.cv.seed},
        {"fold_files", fold_files}}},
      {"min_units", cfg.min_units},
  };
}

} // namespace layerprobe
