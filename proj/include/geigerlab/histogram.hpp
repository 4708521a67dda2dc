#pragma once

// All-successor inter-event histogram with exponentially growing bins.
//
// Bin 0 is the leading bin [0, t_min); bins 1.. are [t_min 10^(k/b), t_min 10^((k+1)/b)),
// the last one truncated at t_max and closed on the right, so every pair with
// delay <= t_max lands in exactly one bin.

#include "geigerlab/timetag.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace geigerlab {

struct HistogramSpec {
  double t_min_s = 1e-8;
  double t_max_s = 1e-2;
  int bins_per_decade = 10;

  void validate() const;
};

struct ExpBinHistogram {
  HistogramSpec spec;
  std::vector<double> edges;          // bins() + 1 entries, edges[0] == 0
  std::vector<std::uint64_t> counts;
  std::uint64_t n_triggers = 0;

  std::size_t bins() const { return counts.size(); }
  double lo(std::size_t i) const { return edges[i]; }
  double hi(std::size_t i) const { return edges[i + 1]; }
  double width(std::size_t i) const { return edges[i + 1] - edges[i]; }
  /// counts / (n_triggers * width)
  double rate(std::size_t i) const;
  std::uint64_t total() const;

  /// Empty histogram with edges laid out for `spec`.
  static ExpBinHistogram with_spec(const HistogramSpec &spec);
};

/// Successor walk: per trigger, visit every successor with a monotone bin cursor.
/// Edge pointers: one forward-only index per bin edge, counts are index differences;
/// cheaper when successors per trigger outnumber bins. Auto picks by that estimate.
enum class HistogramKernel { Auto, SuccessorWalk, EdgePointers };

/// OpenMP kernel over precomputed tick thresholds; thread-local counts are summed
/// at the end. Both kernels give identical counts.
ExpBinHistogram afterpulse_histogram(std::span<const std::uint64_t> ticks, double quantum_s,
                                     const HistogramSpec &spec = {},
                                     HistogramKernel kernel = HistogramKernel::Auto);
ExpBinHistogram afterpulse_histogram(const TagStream &stream, const HistogramSpec &spec = {});

/// Serial reference: each pair binned by binary search over the edges in seconds.
ExpBinHistogram afterpulse_histogram_reference(std::span<const std::uint64_t> ticks,
                                               double quantum_s, const HistogramSpec &spec = {});

/// Number of ordered pairs i < j with (t_j - t_i) * q <= t_max.
std::uint64_t count_pairs_within(std::span<const std::uint64_t> ticks, double quantum_s,
                                 double window_s);

} // namespace geigerlab
