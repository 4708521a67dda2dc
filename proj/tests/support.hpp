#pragma once

// Test-side oracles. Nothing here calls into the library's estimators.

#include "geigerlab/apd.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/poisson.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace support {

/// Homogeneous Poisson arrivals quantized to ticks, no dead time.
inline std::vector<std::uint64_t> poisson_ticks(double rate_hz, double duration_s, double quantum_s,
                                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> gap(rate_hz);
  std::vector<std::uint64_t> out;
  for (double t = gap(rng); t < duration_s; t += gap(rng))
    out.push_back(static_cast<std::uint64_t>(std::floor(t / quantum_s)));
  return out;
}

/// Per-test two-sided p-value giving a family-wise 3-sigma level over n tests.
inline double sidak_p(std::size_t n, double family_p = 0.0026997960632601866) {
  return 1.0 - std::pow(1.0 - family_p, 1.0 / static_cast<double>(n));
}

/// Two-sided normal z for per-test p.
inline double z_for(double p) {
  return boost::math::quantile(boost::math::complement(boost::math::normal(), p / 2));
}

/// Exact two-sided Poisson consistency of an observed count with a mean.
inline bool poisson_consistent(std::uint64_t observed, double mean, double p) {
  if (mean <= 0)
    return observed == 0;
  boost::math::poisson_distribution<> d(mean);
  const auto k = static_cast<double>(observed);
  const double lower = boost::math::cdf(d, k);                       // P(X <= k)
  const double upper = k == 0 ? 1.0 : boost::math::cdf(boost::math::complement(d, k - 1)); // P(X >= k)
  return std::min(lower, upper) > p / 2;
}

/// Simple detector: linear V_br, no traps, P_de independent of bias.
inline geigerlab::ApdState plain_apd(double dark_hz_at_ref = 100.0, double pde = 0.5) {
  geigerlab::ApdState a;
  a.sample_id = "test";
  a.model_id = geigerlab::ApdModel::SLiK;
  a.vbr = {200.0, 0.5, 0.0};
  a.n_tgc = dark_hz_at_ref;
  a.pde_base = pde;
  a.pde_saturation_volt = 0.0;
  a.jitter_sigma_s = 0.0;
  a.active_area_diameter_m = 500e-6;
  return a;
}

inline std::filesystem::path temp_dir(const std::string &name) {
  auto dir = std::filesystem::temp_directory_path() / ("geigerlab_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

} // namespace support
