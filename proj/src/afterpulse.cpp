#include "geigerlab/charlab.hpp"
#include "geigerlab/error.hpp"
#include "charlab_detail.hpp"

#include <algorithm>
#include <cmath>

namespace geigerlab {

namespace {

struct Pooled {
  double counts = 0;
  double width = 0;
};

Pooled pool(const ExpBinHistogram &h, std::size_t from, std::size_t to) {
  Pooled p;
  for (std::size_t i = from; i < to; ++i) {
    p.counts += static_cast<double>(h.counts[i]);
    p.width += h.width(i);
  }
  return p;
}

} // namespace

std::size_t final_decade_start(const ExpBinHistogram &h) {
  const double cut = h.spec.t_max_s / 10.0;
  std::size_t i = h.bins();
  while (i > 0 && h.lo(i - 1) >= cut * (1 - 1e-12))
    --i;
  return i;
}

double AfterpulseAnalysis::remaining_probability(double tau_s) const {
  double p = 0;
  for (const auto &b : excess) {
    if (b.hi_s <= tau_s)
      continue;
    const double lo = std::max(b.lo_s, tau_s);
    p += b.excess_rate_hz * (b.hi_s - lo);
  }
  return std::max(0.0, p);
}

AfterpulseAnalysis analyze_afterpulsing(const ExpBinHistogram &hist,
                                        const PlateauOptions &plateau) {
  if (hist.n_triggers == 0 || hist.total() == 0)
    throw Error("analyze_afterpulsing: empty histogram");
  const std::size_t nb = hist.bins();
  const std::size_t tail = final_decade_start(hist);
  if (nb - tail < 2 || tail == 0)
    throw Error("analyze_afterpulsing: window too short, final decade has fewer than 2 bins");
  const double n = static_cast<double>(hist.n_triggers);

  AfterpulseAnalysis a;
  const Pooled all = pool(hist, tail, nb);
  a.background_rate_hz = all.counts / (n * all.width);

  // plateau: first and second half of the final decade agree within counting noise
  const std::size_t mid = tail + (nb - tail) / 2;
  const Pooled first = pool(hist, tail, mid);
  const Pooled second = pool(hist, mid, nb);
  const double r1 = first.counts / (n * first.width);
  const double r2 = second.counts / (n * second.width);
  const double sigma = std::hypot(std::sqrt(std::max(first.counts, 1.0)) / (n * first.width),
                                  std::sqrt(std::max(second.counts, 1.0)) / (n * second.width));
  const double allowed = std::max(plateau.sigma_tolerance * sigma,
                                  plateau.relative_tolerance * a.background_rate_hz);
  if (std::abs(r1 - r2) > allowed)
    throw Error("analyze_afterpulsing: window too short, tail has not reached a plateau");

  std::size_t first_nonzero = 0;
  while (first_nonzero < nb && hist.counts[first_nonzero] == 0)
    ++first_nonzero;
  a.dead_time_s = hist.lo(first_nonzero);

  std::size_t peak = first_nonzero;
  for (std::size_t i = first_nonzero; i < tail; ++i)
    if (hist.rate(i) > hist.rate(peak))
      peak = i;
  a.recharge_time_s = hist.hi(peak) - a.dead_time_s;

  double area = 0;
  for (std::size_t i = peak; i < nb; ++i) {
    const double excess = hist.rate(i) - a.background_rate_hz;
    if (excess <= 0)
      break;
    area += excess * hist.width(i);
    a.excess.push_back({hist.lo(i), hist.hi(i), excess});
  }
  a.afterpulse_probability = std::max(0.0, area);
  return a;
}

double binary_entropy(double p) {
  if (p <= 0 || p >= 1)
    return 0.0;
  return -p * std::log2(p) - (1 - p) * std::log2(1 - p);
}

DeadTimeChoice optimize_dead_time(const AfterpulseAnalysis &afterpulse, double signal_rate_hz,
                                  double base_qber, double window_s, std::size_t grid_points) {
  if (!std::isfinite(signal_rate_hz) || signal_rate_hz < 0)
    throw Error("optimize_dead_time: signal rate must be finite and >= 0");
  if (!(base_qber >= 0 && base_qber < 0.5))
    throw Error("optimize_dead_time: base_qber must be in [0, 0.5)");
  const double tau_min = std::max(afterpulse.dead_time_s, 0.0);
  if (!(window_s > tau_min) || grid_points < 2)
    throw Error("optimize_dead_time: empty search range");

  // log-spaced above tau_min, tau_min itself first
  const double start = tau_min > 0 ? tau_min : window_s * 1e-6;
  const double ratio = std::pow(window_s / start, 1.0 / static_cast<double>(grid_points - 1));

  DeadTimeChoice best;
  double best_k = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid_points; ++i) {
    double tau = i == 0 ? tau_min : start * std::pow(ratio, static_cast<double>(i));
    if (i + 1 == grid_points)
      tau = window_s;
    const double rate = signal_rate_hz / (1.0 + signal_rate_hz * tau);
    const double qber = std::min(0.5, base_qber + 0.5 * afterpulse.remaining_probability(tau));
    const double k = rate * (1.0 - 2.0 * binary_entropy(qber));
    if (k > best_k) {
      best_k = k;
      best = {k > 0, tau, k, rate, qber};
    }
  }
  if (!(best_k > 0))
    best.positive_key = false;
  return best;
}

} // namespace geigerlab
