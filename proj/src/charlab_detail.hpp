#pragma once

#include "geigerlab/histogram.hpp"

#include <cstdint>

namespace geigerlab {

/// Index of the first bin lying entirely inside the last decade of the window.
std::size_t final_decade_start(const ExpBinHistogram &h);

/// SplitMix64 step; derives independent per-item seeds from one run seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

} // namespace geigerlab
