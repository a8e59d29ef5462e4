#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace layerprobe {

/// Shuffle generator used by make_folds. Recorded in sweep provenance.
inline constexpr std::string_view kFoldPrng = "mt19937_64";
inline constexpr std::string_view kFoldShuffle =
    "fisher-yates(descending, rejection-sampled bound) over sorted ids";

struct FoldAssignment {
  int k = 0;
  std::map<std::string, int> assignment;
  std::optional<std::uint64_t> seed; // nullopt: folds came from a file

  bool external() const noexcept { return !seed.has_value(); }
  std::vector<std::size_t> fold_sizes() const;

  friend bool operator==(const FoldAssignment &, const FoldAssignment &) = default;
};

/// Seeded shuffle of the lexicographically sorted ids, then k contiguous
/// blocks whose sizes differ by at most one (larger blocks first).
FoldAssignment make_folds(std::span<const std::string> stimulus_ids, int k,
                          std::uint64_t seed);

/// Fold file: {"k": int, "assignment": {stimulus_id: fold_index}}.
FoldAssignment parse_folds(std::string_view json_text);
FoldAssignment load_folds(const std::filesystem::path &path);
void write_folds(const FoldAssignment &fa, const std::filesystem::path &path);

struct SplitIds {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

/// Members of `fold` as test, everything else as train, both sorted.
SplitIds split(const FoldAssignment &fa, int fold);

/// Keeps only `ids`; every id must be assigned (MissingStimulus otherwise).
/// Folds may become empty.
FoldAssignment restrict_to(const FoldAssignment &fa,
                           std::span<const std::string> ids);

} // namespace layerprobe
