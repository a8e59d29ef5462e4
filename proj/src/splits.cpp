#include "layerprobe/splits.hpp"

#include "layerprobe/error.hpp"
#include "layerprobe/exchange.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <limits>
#include <random>
#include <set>

namespace layerprobe {

using nlohmann::json;

namespace {

// Uniform integer in [0, bound) by rejection; independent of the standard
// library's distribution implementations.
std::uint64_t bounded(std::mt19937_64 &rng, std::uint64_t bound) {
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max - (max % bound + 1) % bound;
  std::uint64_t r;
  do {
    r = rng();
  } while (r > limit);
  return r % bound;
}

} // namespace

std::vector<std::size_t> FoldAssignment::fold_sizes() const {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(std::max(k, 0)), 0);
  for (const auto &[id, f] : assignment)
    ++sizes[static_cast<std::size_t>(f)];
  return sizes;
}

FoldAssignment make_folds(std::span<const std::string> stimulus_ids, int k,
                          std::uint64_t seed) {
  if (k < 2)
    throw Error(Errc::InvalidConfig, "fold count k must be >= 2");
  std::vector<std::string> ids(stimulus_ids.begin(), stimulus_ids.end());
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw Error(Errc::InvalidValue, "duplicate stimulus ids");
  if (ids.size() < static_cast<std::size_t>(k))
    throw Error(Errc::TooFewStimuli, std::to_string(ids.size()) +
                                         " stimuli cannot fill " +
                                         std::to_string(k) + " folds");

  std::mt19937_64 rng(seed);
  for (std::size_t i = ids.size() - 1; i > 0; --i)
    std::swap(ids[i], ids[bounded(rng, i + 1)]);

  FoldAssignment fa;
  fa.k = k;
  fa.seed = seed;
  const std::size_t n = ids.size();
  const std::size_t base = n / static_cast<std::size_t>(k);
  const std::size_t extra = n % static_cast<std::size_t>(k);
  std::size_t pos = 0;
  for (int f = 0; f < k; ++f) {
    const std::size_t size = base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
    for (std::size_t j = 0; j < size; ++j)
      fa.assignment.emplace(std::move(ids[pos++]), f);
  }
  return fa;
}

FoldAssignment parse_folds(std::string_view json_text) {
  // Duplicate keys inside "assignment" are a stimulus listed twice; the
  // parser callback sees them before the DOM silently merges them.
  std::set<std::string> seen;
  std::string duplicate;
  bool in_assignment = false;
  auto cb = [&](int depth, json::parse_event_t event, json &parsed) {
    if (event == json::parse_event_t::key) {
      const auto key = parsed.get<std::string>();
      if (depth == 1)
        in_assignment = key == "assignment";
      else if (depth == 2 && in_assignment && !seen.insert(key).second &&
               duplicate.empty())
        duplicate = key;
    }
    return true;
  };

  json j;
  try {
    j = json::parse(json_text, cb);
  } catch (const json::exception &e) {
    throw Error(Errc::HeaderParse, e.what());
  }
  if (!duplicate.empty())
    throw Error(Errc::OverlappingFolds,
                "stimulus '" + duplicate + "' assigned more than once");
  if (!j.is_object() || !j.contains("k") || !j.contains("assignment"))
    throw Error(Errc::HeaderParse, "fold file needs 'k' and 'assignment'");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "k" && it.key() != "assignment")
      throw Error(Errc::HeaderParse, "unexpected fold file key '" + it.key() + "'");
  if (!j["k"].is_number_integer() || j["k"].get<std::int64_t>() < 2 ||
      j["k"].get<std::int64_t>() > std::numeric_limits<int>::max())
    throw Error(Errc::HeaderParse, "'k' must be an integer >= 2");
  if (!j["assignment"].is_object())
    throw Error(Errc::HeaderParse, "'assignment' must be an object");

  FoldAssignment fa;
  fa.k = j["k"].get<int>();
  for (auto it = j["assignment"].begin(); it != j["assignment"].end(); ++it) {
    const auto &v = it.value();
    if (v.is_array())
      throw Error(Errc::OverlappingFolds,
                  "stimulus '" + it.key() + "' assigned to several folds");
    if (!v.is_number_integer())
      throw Error(Errc::HeaderParse, "fold index for '" + it.key() +
                                         "' must be an integer");
    const auto f = v.get<std::int64_t>();
    if (f < 0 || f >= fa.k)
      throw Error(Errc::HeaderParse, "fold index " + std::to_string(f) +
                                         " out of range [0, " +
                                         std::to_string(fa.k) + ")");
    fa.assignment.emplace(it.key(), static_cast<int>(f));
  }
  const auto sizes = fa.fold_sizes();
  for (std::size_t f = 0; f < sizes.size(); ++f)
    if (sizes[f] == 0)
      throw Error(Errc::HeaderParse, "fold " + std::to_string(f) + " is empty");
  return fa;
}

FoldAssignment load_folds(const std::filesystem::path &path) {
  return parse_folds(read_file(path));
}

void write_folds(const FoldAssignment &fa, const std::filesystem::path &path) {
  json j;
  j["k"] = fa.k;
  j["assignment"] = json::object();
  for (const auto &[id, f] : fa.assignment)
    j["assignment"][id] = f;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error(Errc::Io, "cannot open " + path.string() + " for writing");
  out << j.dump() << '\n';
}

SplitIds split(const FoldAssignment &fa, int fold) {
  if (fold < 0 || fold >= fa.k)
    throw Error(Errc::FoldOutOfRange, "fold " + std::to_string(fold) +
                                          " not in [0, " + std::to_string(fa.k) +
                                          ")");
  SplitIds out;
  // std::map iterates in lexicographic key order.
  for (const auto &[id, f] : fa.assignment)
    (f == fold ? out.test : out.train).push_back(id);
  return out;
}

FoldAssignment restrict_to(const FoldAssignment &fa,
                           std::span<const std::string> ids) {
  FoldAssignment out;
  out.k = fa.k;
  out.seed = fa.seed;
  for (const auto &id : ids) {
    auto it = fa.assignment.find(id);
    if (it == fa.assignment.end())
      throw Error(Errc::MissingStimulus, "no fold for stimulus '" + id + "'");
    out.assignment.emplace(id, it->second);
  }
  return out;
}

} // namespace layerprobe
