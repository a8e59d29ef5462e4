#include "layerprobe/exchange.hpp"

#include "layerprobe/checksum.hpp"
#include "layerprobe/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace layerprobe {

using nlohmann::json;

namespace {

constexpr std::string_view kMagic = "AMX1";
constexpr std::size_t kPrefixBytes = 8;   // magic + header length
constexpr std::size_t kChecksumBytes = 8; // trailing digest

bool same_bits(const StorageMatrix &a, const StorageMatrix &b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    return false;
  return a.size() == 0 ||
         std::memcmp(a.data(), b.data(), sizeof(float) * a.size()) == 0;
}

bool same_bits(const StorageVector &a, const StorageVector &b) {
  return a.size() == b.size() &&
         (a.size() == 0 ||
          std::memcmp(a.data(), b.data(), sizeof(float) * a.size()) == 0);
}

void check_ids(const std::vector<std::string> &ids, Eigen::Index rows,
               const char *what) {
  if (static_cast<Eigen::Index>(ids.size()) != rows)
    throw Error(Errc::InvalidValue, std::string(what) +
                                        ": stimulus_ids length does not match "
                                        "row count");
  if (ids.size() < 2)
    throw Error(Errc::InvalidValue, std::string(what) + ": need n >= 2");
  std::set<std::string_view> seen;
  for (const auto &id : ids)
    if (!seen.insert(id).second)
      throw Error(Errc::InvalidValue,
                  std::string(what) + ": duplicate stimulus id '" + id + "'");
}

template <typename Derived>
void check_finite(const Eigen::DenseBase<Derived> &v, const char *what) {
  if (!v.allFinite())
    throw Error(Errc::NonFiniteValue,
                std::string(what) + " contains a non-finite value");
}

void put_u32(std::string &out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string &out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
std::uint64_t get_le(std::string_view bytes, std::size_t offset, int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i)
    v |= static_cast<std::uint64_t>(
             static_cast<unsigned char>(bytes[offset + i]))
         << (8 * i);
  return v;
}

void put_floats(std::string &out, const float *data, std::size_t count) {
  const auto start = out.size();
  out.resize(start + 4 * count);
  char *dst = out.data() + start;
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(dst, data, 4 * count);
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      const auto bits = std::bit_cast<std::uint32_t>(data[i]);
      for (int b = 0; b < 4; ++b)
        dst[4 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
    }
  }
}

void get_floats(std::string_view bytes, std::size_t offset, float *data,
                std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(data, bytes.data() + offset, 4 * count);
  } else {
    for (std::size_t i = 0; i < count; ++i)
      data[i] = std::bit_cast<float>(
          static_cast<std::uint32_t>(get_le(bytes, offset + 4 * i, 4)));
  }
}

json header_for(const AnyMatrix &m) {
  json h;
  h["dtype"] = "f32";
  h["order"] = "row-major";
  h["checksum"] = Fnv1a64::name;
  std::visit(
      [&](const auto &v) {
        using T = std::decay_t<decltype(v)>;
        h["stimulus_ids"] = v.stimulus_ids;
        if constexpr (std::is_same_v<T, ActivationMatrix>) {
          h["kind"] = "activation";
          h["model_id"] = v.model_id;
          h["layer_id"] = v.layer_id;
          h["layer_index"] = v.layer_index;
          h["shape"] = {v.values.rows(), v.values.cols()};
        } else if constexpr (std::is_same_v<T, NeuralTargets>) {
          h["kind"] = "neural";
          h["region"] = to_string(v.region);
          h["shape"] = {v.responses.rows(), v.responses.cols()};
        } else {
          h["kind"] = "scalar";
          h["name"] = v.name;
          h["shape"] = {v.scores.size(), 1};
        }
      },
      m);
  return h;
}

const json &require(const json &h, const char *key) {
  auto it = h.find(key);
  if (it == h.end())
    throw Error(Errc::HeaderParse, std::string("missing header key '") + key +
                                       "'");
  return *it;
}

std::string require_string(const json &h, const char *key) {
  const auto &v = require(h, key);
  if (!v.is_string())
    throw Error(Errc::HeaderParse, std::string("header key '") + key +
                                       "' must be a string");
  return v.get<std::string>();
}

void reject_unknown_keys(const json &h, std::initializer_list<const char *> allowed) {
  for (auto it = h.begin(); it != h.end(); ++it) {
    if (std::none_of(allowed.begin(), allowed.end(),
                     [&](const char *k) { return it.key() == k; }))
      throw Error(Errc::HeaderParse, "unexpected header key '" + it.key() + "'");
  }
}

} // namespace

bool operator==(const ActivationMatrix &a, const ActivationMatrix &b) {
  return a.model_id == b.model_id && a.layer_id == b.layer_id &&
         a.layer_index == b.layer_index && a.stimulus_ids == b.stimulus_ids &&
         same_bits(a.values, b.values);
}
bool operator==(const NeuralTargets &a, const NeuralTargets &b) {
  return a.region == b.region && a.stimulus_ids == b.stimulus_ids &&
         same_bits(a.responses, b.responses);
}
bool operator==(const ScalarTargets &a, const ScalarTargets &b) {
  return a.name == b.name && a.stimulus_ids == b.stimulus_ids &&
         same_bits(a.scores, b.scores);
}

std::string_view to_string(Region r) noexcept {
  switch (r) {
  case Region::V1: return "V1";
  case Region::V2: return "V2";
  case Region::V4: return "V4";
  case Region::IT: return "IT";
  }
  return "?";
}

Region parse_region(std::string_view text) {
  if (text == "V1") return Region::V1;
  if (text == "V2") return Region::V2;
  if (text == "V4") return Region::V4;
  if (text == "IT") return Region::IT;
  throw Error(Errc::InvalidValue, "unknown region '" + std::string(text) + "'");
}

std::string target_id(const TargetSet &t) {
  return std::visit(
      [](const auto &v) -> std::string {
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, NeuralTargets>)
          return std::string(to_string(v.region));
        else
          return v.name;
      },
      t);
}

const std::vector<std::string> &stimulus_ids(const TargetSet &t) {
  return std::visit(
      [](const auto &v) -> const std::vector<std::string> & {
        return v.stimulus_ids;
      },
      t);
}

void validate(const ActivationMatrix &m) {
  check_ids(m.stimulus_ids, m.values.rows(), "activation matrix");
  if (m.values.cols() < 1)
    throw Error(Errc::InvalidValue, "activation matrix: need u >= 1");
  check_finite(m.values, "activation matrix");
}

void validate(const NeuralTargets &m) {
  check_ids(m.stimulus_ids, m.responses.rows(), "neural targets");
  if (m.responses.cols() < 1)
    throw Error(Errc::InvalidValue, "neural targets: need s >= 1");
  check_finite(m.responses, "neural targets");
}

void validate(const ScalarTargets &m) {
  check_ids(m.stimulus_ids, m.scores.size(), "scalar targets");
  check_finite(m.scores, "scalar targets");
  if (m.name == "memorability") {
    if ((m.scores.array() <= 0.0f).any() || (m.scores.array() > 1.0f).any())
      throw Error(Errc::InvalidValue,
                  "memorability scores must lie in (0, 1]");
  }
}

void validate(const AnyMatrix &m) {
  std::visit([](const auto &v) { validate(v); }, m);
}

std::string encode_amx(const AnyMatrix &m) {
  validate(m);
  const std::string header = header_for(m).dump();
  if (header.size() > std::numeric_limits<std::uint32_t>::max())
    throw Error(Errc::InvalidValue, "header too large");

  std::string out;
  out.append(kMagic);
  put_u32(out, static_cast<std::uint32_t>(header.size()));
  out.append(header);
  std::visit(
      [&](const auto &v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ActivationMatrix>)
          put_floats(out, v.values.data(), static_cast<std::size_t>(v.values.size()));
        else if constexpr (std::is_same_v<T, NeuralTargets>)
          put_floats(out, v.responses.data(),
                     static_cast<std::size_t>(v.responses.size()));
        else
          put_floats(out, v.scores.data(), static_cast<std::size_t>(v.scores.size()));
      },
      m);
  Fnv1a64 h;
  h.update(std::string_view(out).substr(kPrefixBytes));
  put_u64(out, h.digest());
  return out;
}

AnyMatrix decode_amx(std::string_view bytes) {
  if (bytes.size() < kMagic.size())
    throw Error(Errc::TruncatedPayload, "file shorter than magic");
  if (bytes.substr(0, kMagic.size()) != kMagic)
    throw Error(Errc::BadMagic, "expected 'AMX1'");
  if (bytes.size() < kPrefixBytes)
    throw Error(Errc::TruncatedPayload, "file shorter than header prefix");

  const std::size_t header_len = get_le(bytes, 4, 4);
  if (bytes.size() - kPrefixBytes < header_len)
    throw Error(Errc::TruncatedPayload, "header extends past end of file");

  json h;
  try {
    h = json::parse(bytes.substr(kPrefixBytes, header_len));
  } catch (const json::exception &e) {
    throw Error(Errc::HeaderParse, e.what());
  }
  if (!h.is_object())
    throw Error(Errc::HeaderParse, "header is not a JSON object");

  const std::string kind = require_string(h, "kind");
  if (require_string(h, "dtype") != "f32")
    throw Error(Errc::HeaderParse, "unsupported dtype");
  if (require_string(h, "order") != "row-major")
    throw Error(Errc::HeaderParse, "unsupported order");
  if (require_string(h, "checksum") != Fnv1a64::name)
    throw Error(Errc::HeaderParse, "unsupported checksum algorithm");

  const auto &shape = require(h, "shape");
  if (!shape.is_array() || shape.size() != 2 || !shape[0].is_number_unsigned() ||
      !shape[1].is_number_unsigned())
    throw Error(Errc::HeaderParse, "shape must be [n, u]");
  const auto rows = shape[0].get<std::uint64_t>();
  const auto cols = shape[1].get<std::uint64_t>();
  constexpr std::uint64_t kMaxDim = std::uint64_t{1} << 31;
  if (rows >= kMaxDim || cols >= kMaxDim)
    throw Error(Errc::HeaderParse, "shape out of range");

  const auto &ids_json = require(h, "stimulus_ids");
  if (!ids_json.is_array())
    throw Error(Errc::HeaderParse, "stimulus_ids must be an array");
  std::vector<std::string> ids;
  ids.reserve(ids_json.size());
  for (const auto &id : ids_json) {
    if (!id.is_string())
      throw Error(Errc::HeaderParse, "stimulus ids must be strings");
    ids.push_back(id.get<std::string>());
  }
  if (ids.size() != rows)
    throw Error(Errc::HeaderParse, "stimulus_ids length does not match shape");

  const std::uint64_t count = rows * cols;
  const std::uint64_t expected = kPrefixBytes + header_len + 4 * count + kChecksumBytes;
  if (bytes.size() < expected)
    throw Error(Errc::TruncatedPayload,
                "expected " + std::to_string(expected) + " bytes, found " +
                    std::to_string(bytes.size()));
  if (bytes.size() > expected)
    throw Error(Errc::HeaderParse, "trailing bytes after checksum");

  const std::size_t payload_at = kPrefixBytes + header_len;
  const std::size_t checksum_at = payload_at + 4 * count;
  Fnv1a64 digest;
  digest.update(bytes.substr(kPrefixBytes, checksum_at - kPrefixBytes));
  if (digest.digest() != get_le(bytes, checksum_at, 8))
    throw Error(Errc::ChecksumMismatch, "payload checksum does not match");

  const auto r = static_cast<Eigen::Index>(rows);
  const auto c = static_cast<Eigen::Index>(cols);
  AnyMatrix out;
  if (kind == "activation") {
    reject_unknown_keys(h, {"kind", "model_id", "layer_id", "layer_index",
                            "stimulus_ids", "shape", "dtype", "order",
                            "checksum"});
    ActivationMatrix m;
    m.model_id = require_string(h, "model_id");
    m.layer_id = require_string(h, "layer_id");
    const auto &idx = require(h, "layer_index");
    if (!idx.is_number_integer())
      throw Error(Errc::HeaderParse, "layer_index must be an integer");
    m.layer_index = idx.get<std::int64_t>();
    m.stimulus_ids = std::move(ids);
    m.values.resize(r, c);
    get_floats(bytes, payload_at, m.values.data(), count);
    out = std::move(m);
  } else if (kind == "neural") {
    reject_unknown_keys(h, {"kind", "region", "stimulus_ids", "shape", "dtype",
                            "order", "checksum"});
    NeuralTargets m;
    try {
      m.region = parse_region(require_string(h, "region"));
    } catch (const Error &e) {
      throw Error(Errc::HeaderParse, e.what());
    }
    m.stimulus_ids = std::move(ids);
    m.responses.resize(r, c);
    get_floats(bytes, payload_at, m.responses.data(), count);
    out = std::move(m);
  } else if (kind == "scalar") {
    reject_unknown_keys(h, {"kind", "name", "stimulus_ids", "shape", "dtype",
                            "order", "checksum"});
    if (cols != 1)
      throw Error(Errc::HeaderParse, "scalar targets must have shape [n, 1]");
    ScalarTargets m;
    m.name = require_string(h, "name");
    m.stimulus_ids = std::move(ids);
    m.scores.resize(r);
    get_floats(bytes, payload_at, m.scores.data(), count);
    out = std::move(m);
  } else {
    throw Error(Errc::HeaderParse, "unknown kind '" + kind + "'");
  }
  validate(out);
  return out;
}

std::string read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(Errc::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad())
    throw Error(Errc::Io, "read failed for " + path.string());
  return std::move(ss).str();
}

void write_matrix(const AnyMatrix &m, const std::filesystem::path &path) {
  const std::string bytes = encode_amx(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error(Errc::Io, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw Error(Errc::Io, "write failed for " + path.string());
}

AnyMatrix read_matrix(const std::filesystem::path &path) {
  return decode_amx(read_file(path));
}

ActivationMatrix read_activation(const std::filesystem::path &path) {
  auto m = read_matrix(path);
  if (auto *a = std::get_if<ActivationMatrix>(&m))
    return std::move(*a);
  throw Error(Errc::InvalidValue, path.string() + " is not an activation file");
}

TargetSet read_targets(const std::filesystem::path &path) {
  auto m = read_matrix(path);
  if (auto *n = std::get_if<NeuralTargets>(&m))
    return std::move(*n);
  if (auto *s = std::get_if<ScalarTargets>(&m))
    return std::move(*s);
  throw Error(Errc::InvalidValue, path.string() + " is not a target file");
}

Aligned align(const ActivationMatrix &a, const TargetSet &t) {
  const auto &tids = stimulus_ids(t);
  std::map<std::string_view, Eigen::Index> target_row;
  for (std::size_t i = 0; i < tids.size(); ++i)
    target_row.emplace(tids[i], static_cast<Eigen::Index>(i));

  // (id, activation row, target row), sorted by id
  std::vector<std::tuple<std::string_view, Eigen::Index, Eigen::Index>> shared;
  for (std::size_t i = 0; i < a.stimulus_ids.size(); ++i) {
    auto it = target_row.find(a.stimulus_ids[i]);
    if (it != target_row.end())
      shared.emplace_back(it->first, static_cast<Eigen::Index>(i), it->second);
  }
  if (shared.empty())
    throw Error(Errc::EmptyIntersection,
                "activations and targets share no stimulus ids");
  std::sort(shared.begin(), shared.end());

  const auto n = static_cast<Eigen::Index>(shared.size());
  Aligned out;
  out.dropped_activation_rows = a.stimulus_ids.size() - shared.size();
  out.dropped_target_rows = tids.size() - shared.size();

  std::vector<std::string> ids;
  ids.reserve(shared.size());
  for (const auto &s : shared)
    ids.emplace_back(std::get<0>(s));

  out.activations.model_id = a.model_id;
  out.activations.layer_id = a.layer_id;
  out.activations.layer_index = a.layer_index;
  out.activations.stimulus_ids = ids;
  out.activations.values.resize(n, a.values.cols());
  for (Eigen::Index i = 0; i < n; ++i)
    out.activations.values.row(i) = a.values.row(std::get<1>(shared[i]));

  out.targets = std::visit(
      [&](const auto &v) -> TargetSet {
        using T = std::decay_t<decltype(v)>;
        T r;
        r.stimulus_ids = ids;
        if constexpr (std::is_same_v<T, NeuralTargets>) {
          r.region = v.region;
          r.responses.resize(n, v.responses.cols());
          for (Eigen::Index i = 0; i < n; ++i)
            r.responses.row(i) = v.responses.row(std::get<2>(shared[i]));
        } else {
          r.name = v.name;
          r.scores.resize(n);
          for (Eigen::Index i = 0; i < n; ++i)
            r.scores(i) = v.scores(std::get<2>(shared[i]));
        }
        return r;
      },
      t);
  return out;
}

// ---- manifest -------------------------------------------------------------

std::string_view to_string(EntryKind k) noexcept {
  switch (k) {
  case EntryKind::Activation: return "activation";
  case EntryKind::Neural: return "neural";
  case EntryKind::Scalar: return "scalar";
  case EntryKind::Folds: return "folds";
  }
  return "?";
}

EntryKind parse_entry_kind(std::string_view text) {
  if (text == "activation") return EntryKind::Activation;
  if (text == "neural") return EntryKind::Neural;
  if (text == "scalar") return EntryKind::Scalar;
  if (text == "folds") return EntryKind::Folds;
  throw Error(Errc::HeaderParse, "unknown manifest entry kind '" +
                                     std::string(text) + "'");
}

std::uint64_t file_checksum(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(Errc::Io, "cannot open " + path.string());
  Fnv1a64 h;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto got = static_cast<std::size_t>(in.gcount());
    h.update(std::as_bytes(std::span(buf.data(), got)));
  }
  if (in.bad())
    throw Error(Errc::Io, "read failed for " + path.string());
  return h.digest();
}

ManifestEntry make_entry(const std::filesystem::path &base_dir,
                         const std::string &relative_path, EntryKind kind) {
  return {relative_path, kind, to_hex(file_checksum(base_dir / relative_path))};
}

bool entry_checksum_matches(const Manifest &m, const ManifestEntry &e) {
  return to_hex(file_checksum(m.resolve(e))) == e.checksum;
}

Manifest load_manifest(const std::filesystem::path &path, bool verify) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception &e) {
    throw Error(Errc::HeaderParse, path.string() + ": " + e.what());
  }
  Manifest m;
  m.base_dir = path.parent_path();
  try {
    m.dataset_id = j.at("dataset_id").get<std::string>();
    std::set<std::string> paths;
    for (const auto &e : j.at("entries")) {
      ManifestEntry entry;
      entry.path = e.at("path").get<std::string>();
      entry.kind = parse_entry_kind(e.at("kind").get<std::string>());
      entry.checksum = e.at("checksum").get<std::string>();
      if (!paths.insert(entry.path).second)
        throw Error(Errc::HeaderParse, "duplicate manifest path " + entry.path);
      m.entries.push_back(std::move(entry));
    }
  } catch (const json::exception &e) {
    throw Error(Errc::HeaderParse, path.string() + ": " + e.what());
  }
  if (verify) {
    for (const auto &e : m.entries)
      if (!entry_checksum_matches(m, e))
        throw Error(Errc::ChecksumMismatch, "manifest entry " + e.path);
  }
  return m;
}

void write_manifest(const Manifest &m, const std::filesystem::path &path) {
  json j;
  j["dataset_id"] = m.dataset_id;
  j["entries"] = json::array();
  for (const auto &e : m.entries)
    j["entries"].push_back(
        {{"path", e.path}, {"kind", to_string(e.kind)}, {"checksum", e.checksum}});
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error(Errc::Io, "cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

} // namespace layerprobe
