#include "geigerlab/charlab.hpp"
#include "geigerlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace geigerlab {

namespace {

constexpr std::size_t kMinPairs = 1000;

// Interpolated half-maximum crossings around `peak`; `at` must return 0 off the support.
template <class Count>
double width_at_half(const Count &at, long peak, long max_steps) {
  const double half = 0.5 * static_cast<double>(at(peak));
  long l = peak;
  while (peak - l < max_steps && static_cast<double>(at(l - 1)) >= half)
    --l;
  long r = peak;
  while (r - peak < max_steps && static_cast<double>(at(r + 1)) >= half)
    ++r;
  // left crossing lies between l - 1 (below half) and l (at or above)
  const double cl0 = static_cast<double>(at(l - 1)), cl1 = static_cast<double>(at(l));
  const double cr0 = static_cast<double>(at(r)), cr1 = static_cast<double>(at(r + 1));
  const double xl = static_cast<double>(l - 1) + (half - cl0) / (cl1 - cl0);
  const double xr = static_cast<double>(r) + (cr0 - half) / (cr0 - cr1);
  return xr - xl;
}

} // namespace

double jitter_fwhm(std::span<const std::uint64_t> reference_ticks,
                   std::span<const std::uint64_t> event_ticks, double quantum_s,
                   double period_ticks) {
  if (reference_ticks.empty())
    throw Error("jitter_fwhm: no reference ticks");
  if (!std::is_sorted(reference_ticks.begin(), reference_ticks.end()))
    throw Error("jitter_fwhm: reference ticks must be sorted");
  if (!(quantum_s > 0))
    throw Error("jitter_fwhm: quantum must be > 0");

  if (period_ticks > 0) {
    // circular histogram of the phase relative to the reference comb
    const auto m = static_cast<std::size_t>(std::ceil(period_ticks));
    std::vector<std::uint64_t> hist(m, 0);
    const double origin = static_cast<double>(reference_ticks.front());
    std::size_t pairs = 0;
    for (const std::uint64_t e : event_ticks) {
      double phase = std::fmod(static_cast<double>(e) - origin, period_ticks);
      if (phase < 0)
        phase += period_ticks;
      const auto b = std::min(static_cast<std::size_t>(phase), m - 1);
      ++hist[b];
      ++pairs;
    }
    if (pairs < kMinPairs)
      throw Error("jitter_fwhm: too few events");
    const auto peak = static_cast<long>(std::max_element(hist.begin(), hist.end()) - hist.begin());
    const auto ml = static_cast<long>(m);
    auto at = [&](long i) { return hist[static_cast<std::size_t>(((i % ml) + ml) % ml)]; };
    return width_at_half(at, peak, ml / 2) * quantum_s;
  }

  std::vector<std::int64_t> diffs;
  diffs.reserve(event_ticks.size());
  for (const std::uint64_t e : event_ticks) {
    auto it = std::upper_bound(reference_ticks.begin(), reference_ticks.end(), e);
    if (it == reference_ticks.begin())
      continue; // no earlier reference
    diffs.push_back(static_cast<std::int64_t>(e - *(it - 1)));
  }
  if (diffs.size() < kMinPairs)
    throw Error("jitter_fwhm: too few events");
  const auto [mn, mx] = std::minmax_element(diffs.begin(), diffs.end());
  const std::int64_t lo = *mn;
  std::vector<std::uint64_t> hist(static_cast<std::size_t>(*mx - lo + 1), 0);
  for (const std::int64_t d : diffs)
    ++hist[static_cast<std::size_t>(d - lo)];
  const auto peak = static_cast<long>(std::max_element(hist.begin(), hist.end()) - hist.begin());
  const auto n = static_cast<long>(hist.size());
  auto at = [&](long i) -> std::uint64_t {
    return i < 0 || i >= n ? 0 : hist[static_cast<std::size_t>(i)];
  };
  return width_at_half(at, peak, n + 1) * quantum_s;
}

} // namespace geigerlab
