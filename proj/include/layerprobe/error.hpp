#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace layerprobe {

enum class Errc {
  // exchange
  Io,
  NonFiniteValue,
  BadMagic,
  ChecksumMismatch,
  HeaderParse,
  TruncatedPayload,
  InvalidValue,
  EmptyIntersection,
  // linalg
  NonFiniteInput,
  DegenerateInput,
  DimensionMismatch,
  // splits
  TooFewStimuli,
  OverlappingFolds,
  MissingStimulus,
  FoldOutOfRange,
  // metrics
  ZeroVariance,
  LengthMismatch,
  InsufficientSamples,
  AllSitesDegenerate,
  // meta
  NoOverlap,
  TooFewLayers,
  NoRecords,
  VersionMismatch,
  // run configuration
  InvalidConfig,
};

std::string_view to_string(Errc code) noexcept;

/// Typed failure carried through every layer of the library. The CLI maps
/// `code()` onto its exit-code scheme.
class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string &what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  Errc code() const noexcept { return code_; }

private:
  Errc code_;
};

inline std::string_view to_string(Errc code) noexcept {
  switch (code) {
  case Errc::Io: return "Io";
  case Errc::NonFiniteValue: return "NonFiniteValue";
  case Errc::BadMagic: return "BadMagic";
  case Errc::ChecksumMismatch: return "ChecksumMismatch";
  case Errc::HeaderParse: return "HeaderParse";
  case Errc::TruncatedPayload: return "TruncatedPayload";
  case Errc::InvalidValue: return "InvalidValue";
  case Errc::EmptyIntersection: return "EmptyIntersection";
  case Errc::NonFiniteInput: return "NonFiniteInput";
  case Errc::DegenerateInput: return "DegenerateInput";
  case Errc::DimensionMismatch: return "DimensionMismatch";
  case Errc::TooFewStimuli: return "TooFewStimuli";
  case Errc::OverlappingFolds: return "OverlappingFolds";
  case Errc::MissingStimulus: return "MissingStimulus";
  case Errc::FoldOutOfRange: return "FoldOutOfRange";
  case Errc::ZeroVariance: return "ZeroVariance";
  case Errc::LengthMismatch: return "LengthMismatch";
  case Errc::InsufficientSamples: return "InsufficientSamples";
  case Errc::AllSitesDegenerate: return "AllSitesDegenerate";
  case Errc::NoOverlap: return "NoOverlap";
  case Errc::TooFewLayers: return "TooFewLayers";
  case Errc::NoRecords: return "NoRecords";
  case Errc::VersionMismatch: return "VersionMismatch";
  case Errc::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

} // namespace layerprobe
