#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace gmclab {

/// Philox4x32-10 block function (Salmon et al. counter-based generator).
/// Pure: the same (counter, key) always maps to the same 128 output bits.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

/// Sub-stream domains. A replica index is combined with a domain so that
/// different consumers inside one experiment never share counter space.
enum class StreamDomain : std::uint64_t {
  Field = 1,
  Maximum = 2,
  PathDescent = 3,
  PathAscent = 4,
  Lateral = 5,
  SemicircleAverage = 6,
  Bootstrap = 7,
  Synthetic = 8,
};

constexpr std::uint64_t derive_stream(StreamDomain domain, std::uint64_t index) noexcept {
  return (static_cast<std::uint64_t>(domain) << 56) ^ index;
}

/// Sequential view over one Philox stream. The key is the 64-bit seed, the
/// upper half of the counter is the stream id, the lower half a block index.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream) noexcept;

  std::uint64_t next_u64() noexcept;
  /// Uniform on the open interval (0, 1).
  double uniform() noexcept;
  double normal() noexcept;
  double exponential(double rate) noexcept;
  void fill_normal(std::span<double> out) noexcept;

 private:
  void refill() noexcept;

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace gmclab
