#include "geigerlab/histogram.hpp"

#include "geigerlab/error.hpp"
#include "geigerlab/util.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <omp.h>

namespace geigerlab {

void HistogramSpec::validate() const {
  if (!(t_min_s > 0))
    throw ConfigError("histogram.t_min_s", "must be > 0");
  if (!(t_max_s > t_min_s))
    throw ConfigError("histogram.t_max_s", "must exceed t_min_s");
  if (bins_per_decade < 1)
    throw ConfigError("histogram.bins_per_decade", "must be >= 1");
}

double ExpBinHistogram::rate(std::size_t i) const {
  if (n_triggers == 0)
    return 0.0;
  return static_cast<double>(counts[i]) / (static_cast<double>(n_triggers) * width(i));
}

std::uint64_t ExpBinHistogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

ExpBinHistogram ExpBinHistogram::with_spec(const HistogramSpec &spec) {
  spec.validate();
  ExpBinHistogram h;
  h.spec = spec;
  const double decades = std::log10(spec.t_max_s / spec.t_min_s);
  const auto n_log = static_cast<std::size_t>(std::ceil(decades * spec.bins_per_decade - 1e-9));
  h.edges.reserve(n_log + 2);
  h.edges.push_back(0.0);
  for (std::size_t k = 0; k < n_log; ++k)
    h.edges.push_back(spec.t_min_s *
                      std::pow(10.0, static_cast<double>(k) / spec.bins_per_decade));
  h.edges.push_back(spec.t_max_s);
  h.counts.assign(h.edges.size() - 1, 0);
  return h;
}

namespace {

std::uint64_t ticks_at_most(double seconds, double q) {
  auto n = static_cast<std::uint64_t>(seconds / q);
  while (n > 0 && static_cast<double>(n) * q > seconds)
    --n;
  while (static_cast<double>(n + 1) * q <= seconds)
    ++n;
  return n;
}

void require_sorted(std::span<const std::uint64_t> ticks) {
  if (!std::is_sorted(ticks.begin(), ticks.end()))
    throw Error("afterpulse_histogram: ticks must be non-decreasing");
}

} // namespace

ExpBinHistogram afterpulse_histogram(std::span<const std::uint64_t> ticks, double quantum_s,
                                     const HistogramSpec &spec, HistogramKernel kernel) {
  if (ticks.size() < 2)
    throw Error("afterpulse_histogram: need at least 2 events");
  require_sorted(ticks);
  ExpBinHistogram h = ExpBinHistogram::with_spec(spec);
  h.n_triggers = ticks.size();

  const std::size_t nb = h.bins();
  // bin b holds delays d with lo_tick[b] <= d < lo_tick[b + 1]; the last bin ends at window
  std::vector<std::uint64_t> lo_tick(nb);
  for (std::size_t b = 0; b < nb; ++b)
    lo_tick[b] = ticks_at_least(h.edges[b], quantum_s);
  const std::uint64_t window = ticks_at_most(spec.t_max_s, quantum_s);

  const std::size_t n = ticks.size();
  const std::uint64_t *t = ticks.data();
  const std::uint64_t *edge = lo_tick.data();

  if (kernel == HistogramKernel::Auto) {
    const double span = static_cast<double>(t[n - 1] - t[0]) + 1.0;
    const double successors = static_cast<double>(n - 1) * std::min(1.0, static_cast<double>(window) / span);
    kernel = successors > static_cast<double>(nb) ? HistogramKernel::EdgePointers
                                                  : HistogramKernel::SuccessorWalk;
  }

  if (kernel == HistogramKernel::SuccessorWalk) {
#pragma omp parallel
    {
      std::vector<std::uint64_t> local(nb, 0);
#pragma omp for schedule(dynamic, 4096) nowait
      for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t origin = t[i];
        std::size_t b = 0;
        for (std::size_t j = i + 1; j < n; ++j) {
          const std::uint64_t d = t[j] - origin;
          if (d > window)
            break;
          while (b + 1 < nb && edge[b + 1] <= d)
            ++b;
          ++local[b];
        }
      }
#pragma omp critical(geigerlab_histogram_merge)
      for (std::size_t b = 0; b < nb; ++b)
        h.counts[b] += local[b];
    }
    return h;
  }

#pragma omp parallel
  {
    std::vector<std::uint64_t> local(nb, 0);
    // ptr[b]: first successor with delay >= lo_tick[b]; ptr[nb]: first beyond the window
    std::vector<std::size_t> ptr(nb + 1, 0);
    bool primed = false;
    // static schedule: each thread owns one contiguous trigger range, so pointers only advance
#pragma omp for schedule(static) nowait
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint64_t origin = t[i];
      if (!primed) {
        for (std::size_t b = 0; b < nb; ++b)
          ptr[b] = static_cast<std::size_t>(std::lower_bound(t + i + 1, t + n, origin + edge[b]) - t);
        ptr[nb] = static_cast<std::size_t>(std::upper_bound(t + i + 1, t + n, origin + window) - t);
        primed = true;
      } else {
        for (std::size_t b = 0; b < nb; ++b) {
          std::size_t p = std::max(ptr[b], i + 1);
          while (p < n && t[p] - origin < edge[b])
            ++p;
          ptr[b] = p;
        }
        std::size_t p = std::max(ptr[nb], i + 1);
        while (p < n && t[p] - origin <= window)
          ++p;
        ptr[nb] = p;
      }
      for (std::size_t b = 0; b < nb; ++b) {
        const std::size_t hi = std::min(ptr[b + 1], ptr[nb]);
        if (hi > ptr[b])
          local[b] += hi - ptr[b];
      }
    }
#pragma omp critical(geigerlab_histogram_merge)
    for (std::size_t b = 0; b < nb; ++b)
      h.counts[b] += local[b];
  }
  return h;
}

ExpBinHistogram afterpulse_histogram(const TagStream &stream, const HistogramSpec &spec) {
  const auto ticks = stream.ticks();
  return afterpulse_histogram(ticks, stream.quantum_s(), spec);
}

ExpBinHistogram afterpulse_histogram_reference(std::span<const std::uint64_t> ticks,
                                               double quantum_s, const HistogramSpec &spec) {
  if (ticks.size() < 2)
    throw Error("afterpulse_histogram: need at least 2 events");
  require_sorted(ticks);
  ExpBinHistogram h = ExpBinHistogram::with_spec(spec);
  h.n_triggers = ticks.size();
  const double t_max = spec.t_max_s;
  for (std::size_t i = 0; i < ticks.size(); ++i) {
    for (std::size_t j = i + 1; j < ticks.size(); ++j) {
      const double dt = static_cast<double>(ticks[j] - ticks[i]) * quantum_s;
      if (dt > t_max)
        break;
      auto it = std::upper_bound(h.edges.begin(), h.edges.end(), dt);
      auto b = static_cast<std::size_t>(it - h.edges.begin()) - 1;
      b = std::min(b, h.bins() - 1); // dt == t_max closes the last bin
      ++h.counts[b];
    }
  }
  return h;
}

std::uint64_t count_pairs_within(std::span<const std::uint64_t> ticks, double quantum_s,
                                 double window_s) {
  std::uint64_t pairs = 0;
  std::size_t j = 0;
  for (std::size_t i = 0; i < ticks.size(); ++i) {
    j = std::max(j, i + 1);
    while (j < ticks.size() && static_cast<double>(ticks[j] - ticks[i]) * quantum_s <= window_s)
      ++j;
    pairs += j - i - 1;
  }
  return pairs;
}

} // namespace geigerlab
