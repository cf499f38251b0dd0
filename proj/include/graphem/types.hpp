#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>

namespace graphem {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Per-point assignment produced by classification and by the synthetic
/// generators: a point either belongs to the pattern or to the uniform
/// background component.
enum class PointLabel : std::uint8_t { pattern, background };

inline const char* to_string(PointLabel label) {
  return label == PointLabel::pattern ? "pattern" : "background";
}

namespace detail {

// splitmix64, used to derive independent sub-seeds from a user seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t state = seed ^ (0xa0761d6478bd642full + stream * 0xe7037ed1a0b428dbull);
  return splitmix64(state);
}

}  // namespace detail

}  // namespace graphem
