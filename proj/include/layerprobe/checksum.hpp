#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace layerprobe {

/// Streaming 64-bit FNV-1a. Any single-byte change to the input changes the
/// digest, which is what the file formats rely on to reject corruption.
class Fnv1a64 {
public:
  static constexpr std::string_view name = "fnv1a64";

  void update(std::span<const std::byte> bytes) noexcept {
    for (auto b : bytes) {
      state_ ^= static_cast<std::uint64_t>(b);
      state_ *= kPrime;
    }
  }
  void update(std::string_view text) noexcept {
    update(std::as_bytes(std::span(text.data(), text.size())));
  }
  std::uint64_t digest() const noexcept { return state_; }

private:
  static constexpr std::uint64_t kOffset = 0xcbf29ce484222325ULL;
  static constexpr std::uint64_t kPrime = 0x100000001b3ULL;
  std::uint64_t state_ = kOffset;
};

inline std::uint64_t fnv1a64(std::string_view text) noexcept {
  Fnv1a64 h;
  h.update(text);
  return h.digest();
}

inline std::string to_hex(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4)
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return out;
}

} // namespace layerprobe
