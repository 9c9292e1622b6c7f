#pragma once

#include <cstdint>
#include <random>

namespace rwre {

// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives a child key from a parent key and an index. Used to key
// per-vertex environment streams by path and per-draw walk seeds.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept {
  return mix64(parent ^ mix64(index + 0x9e3779b97f4a7c15ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a,
                                    std::uint64_t b) noexcept {
  return derive_seed(derive_seed(parent, a), b);
}

// Uniform double in [0,1) from the top 53 bits.
constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Counter-based stream: value j of the stream keyed by `key` is a pure
// function of (key, j), so a stream can be rebuilt at any time.
class CounterStream {
 public:
  explicit constexpr CounterStream(std::uint64_t key) noexcept : key_(key) {}

  constexpr std::uint64_t next_u64() noexcept {
    key_ += 0x9e3779b97f4a7c15ULL;
    return mix64(key_);
  }
  constexpr double uniform() noexcept { return to_unit(next_u64()); }

 private:
  std::uint64_t key_;
};

// Walk-side generator. The mt19937_64 output sequence is fixed by the
// standard; the unit conversion is ours so results are portable.
class WalkRng {
 public:
  explicit WalkRng(std::uint64_t seed) : engine_(mix64(seed)) {}
  double uniform() { return to_unit(engine_()); }
  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rwre
