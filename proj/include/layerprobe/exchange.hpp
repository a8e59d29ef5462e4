#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace layerprobe {

/// On-disk precision. Everything numerical downstream works on `double`.
using StorageMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using StorageVector = Eigen::VectorXf;

enum class Region { V1, V2, V4, IT };

std::string_view to_string(Region r) noexcept;
Region parse_region(std::string_view text);

/// Stimuli x units responses of one model layer.
struct ActivationMatrix {
  std::string model_id;
  std::string layer_id;
  std::int64_t layer_index = 0;
  std::vector<std::string> stimulus_ids;
  StorageMatrix values;

  Eigen::Index stimuli() const noexcept { return values.rows(); }
  Eigen::Index units() const noexcept { return values.cols(); }

  friend bool operator==(const ActivationMatrix &, const ActivationMatrix &);
};

/// Stimuli x recording-site responses for one ventral-stream region.
struct NeuralTargets {
  Region region = Region::IT;
  std::vector<std::string> stimulus_ids;
  StorageMatrix responses;

  friend bool operator==(const NeuralTargets &, const NeuralTargets &);
};

/// One score per stimulus, e.g. memorability.
struct ScalarTargets {
  std::string name;
  std::vector<std::string> stimulus_ids;
  StorageVector scores;

  friend bool operator==(const ScalarTargets &, const ScalarTargets &);
};

using TargetSet = std::variant<NeuralTargets, ScalarTargets>;
using AnyMatrix = std::variant<ActivationMatrix, NeuralTargets, ScalarTargets>;

/// Region label for neural targets, score name for scalar targets.
std::string target_id(const TargetSet &t);
const std::vector<std::string> &stimulus_ids(const TargetSet &t);

// Invariant checks; throw Error{InvalidValue | NonFiniteValue}.
void validate(const ActivationMatrix &m);
void validate(const NeuralTargets &m);
void validate(const ScalarTargets &m);
void validate(const AnyMatrix &m);

/// AMX container:
///   "AMX1" | u32 LE header length | JSON header | n*u f32 LE row-major |
///   u64 LE FNV-1a of (header bytes ++ payload bytes)
/// The encoding is a pure function of the value, so identical inputs give
/// identical bytes.
std::string encode_amx(const AnyMatrix &m);
AnyMatrix decode_amx(std::string_view bytes);

void write_matrix(const AnyMatrix &m, const std::filesystem::path &path);
AnyMatrix read_matrix(const std::filesystem::path &path);

// Kind-checked wrappers over read_matrix.
ActivationMatrix read_activation(const std::filesystem::path &path);
TargetSet read_targets(const std::filesystem::path &path);

struct Aligned {
  ActivationMatrix activations;
  TargetSet targets;
  std::size_t dropped_activation_rows = 0;
  std::size_t dropped_target_rows = 0;
};

/// Restricts both inputs to their shared stimuli, rows ordered
/// lexicographically by stimulus id.
Aligned align(const ActivationMatrix &a, const TargetSet &t);

// ---- manifest -------------------------------------------------------------

enum class EntryKind { Activation, Neural, Scalar, Folds };

std::string_view to_string(EntryKind k) noexcept;
EntryKind parse_entry_kind(std::string_view text);

struct ManifestEntry {
  std::string path; // relative to the manifest's directory
  EntryKind kind = EntryKind::Activation;
  std::string checksum; // FNV-1a 64 of the whole file, 16 hex digits
};

struct Manifest {
  std::string dataset_id;
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const ManifestEntry &e) const {
    return base_dir / e.path;
  }
};

std::uint64_t file_checksum(const std::filesystem::path &path);
std::string read_file(const std::filesystem::path &path);

ManifestEntry make_entry(const std::filesystem::path &base_dir,
                         const std::string &relative_path, EntryKind kind);

/// Parses a manifest. With `verify`, every entry's checksum is recomputed and
/// the first mismatch throws ChecksumMismatch.
Manifest load_manifest(const std::filesystem::path &path, bool verify = true);
bool entry_checksum_matches(const Manifest &m, const ManifestEntry &e);
void write_manifest(const Manifest &m, const std::filesystem::path &path);

} // namespace layerprobe
