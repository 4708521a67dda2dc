#include "geigerlab/charlab.hpp"
#include "geigerlab/error.hpp"
#include "geigerlab/simulate.hpp"
#include "geigerlab/util.hpp"

#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <numbers>

namespace geigerlab {

double dark_count_rate(const TagStream &stream) {
  if (!(stream.duration_s() > 0))
    throw Error("dark_count_rate: stream duration must be > 0");
  return static_cast<double>(stream.size()) / stream.duration_s();
}

double mean_wait_after_dead(double rate_hz, double recharge_s) {
  if (!(rate_hz > 0))
    return std::numeric_limits<double>::infinity();
  if (recharge_s <= 0)
    return 1.0 / rate_hz;
  // survival exp(-rate s^2 / 2R) on the ramp, then exp(-rate R/2 - rate (s - R))
  const double a = rate_hz / (2.0 * recharge_s);
  const double ramp = 0.5 * std::sqrt(std::numbers::pi / a) * std::erf(recharge_s * std::sqrt(a));
  return ramp + std::exp(-0.5 * rate_hz * recharge_s) / rate_hz;
}

double true_rate_from_measured(double measured_hz, double dead_s, double recharge_s) {
  if (!(measured_hz >= 0))
    throw Error("true_rate_from_measured: measured rate must be >= 0");
  if (measured_hz == 0)
    return 0.0;
  if (measured_hz * dead_s >= 1.0)
    throw Error("true_rate_from_measured: measured rate at or beyond 1/dead_time");
  auto f = [&](double log_rate) {
    const double r = std::exp(log_rate);
    return 1.0 / (dead_s + mean_wait_after_dead(r, recharge_s)) - measured_hz;
  };
  double lo = std::log(measured_hz);
  double hi = lo + 1.0;
  while (f(hi) < 0)
    hi += 1.0;
  std::uintmax_t iters = 200;
  auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(50),
                                                 iters);
  return std::exp(0.5 * (a + b));
}

VbrMeasurement measure_vbr(std::span<const BiasProbe> sweep) {
  for (std::size_t i = 1; i < sweep.size(); ++i)
    if (!(sweep[i].v_bias_volt > sweep[i - 1].v_bias_volt))
      throw Error("measure_vbr: sweep must be strictly increasing in bias");
  for (std::size_t i = 1; i < sweep.size(); ++i) {
    if (!sweep[i - 1].avalanche && sweep[i].avalanche) {
      const double lo = sweep[i - 1].v_bias_volt;
      const double hi = sweep[i].v_bias_volt;
      return {0.5 * (lo + hi), 0.5 * (hi - lo)};
    }
  }
  throw Error("measure_vbr: no breakdown in range");
}

VbrMeasurement bisect_vbr(const std::function<bool(double)> &avalanche_at, double v_quiet,
                          double v_avalanche, double tolerance_volt) {
  if (!(v_avalanche > v_quiet))
    throw Error("bisect_vbr: bracket must be increasing");
  if (avalanche_at(v_quiet) || !avalanche_at(v_avalanche))
    throw Error("measure_vbr: no breakdown in range");
  while (0.5 * (v_avalanche - v_quiet) > tolerance_volt) {
    const double mid = 0.5 * (v_quiet + v_avalanche);
    if (avalanche_at(mid))
      v_avalanche = mid;
    else
      v_quiet = mid;
  }
  return {0.5 * (v_quiet + v_avalanche), 0.5 * (v_avalanche - v_quiet)};
}

bool avalanche_probe(const ApdState &apd, const QuenchCircuit &circuit, double temperature_c,
                     double v_bias, double dwell_s, double photon_rate_hz, std::uint64_t seed) {
  if (apd.failed)
    return false;
  const OperatingPoint op{temperature_c, v_bias};
  const double v_excess = excess_voltage(apd, op);
  if (v_excess <= 0)
    return false;
  if (!can_quench(circuit, v_excess))
    return true; // latched: continuous current is visible on the scope
  Scenario sc;
  sc.duration_s = dwell_s;
  sc.illumination = CwLight{photon_rate_hz};
  sc.rng_seed = seed;
  return !simulate(apd, op, sc, circuit).empty();
}

TagStream apply_dead_time(const TagStream &stream, double tau_s) {
  if (!(tau_s >= 0))
    throw Error("apply_dead_time: tau must be >= 0");
  TagStream out;
  out.header = stream.header;
  if (tau_s == 0) {
    out.events = stream.events;
    return out;
  }
  const std::uint64_t gap = ticks_at_least(tau_s, stream.quantum_s());
  std::uint64_t last[kMaxChannels] = {};
  bool seen[kMaxChannels] = {};
  out.events.reserve(stream.size());
  for (const auto &e : stream.events) {
    const unsigned ch = e.channel;
    if (seen[ch] && e.tick - last[ch] < gap)
      continue;
    seen[ch] = true;
    last[ch] = e.tick;
    out.events.push_back(e);
  }
  return out;
}

} // namespace geigerlab
