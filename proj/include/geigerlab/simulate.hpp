#pragma once

#include "geigerlab/apd.hpp"
#include "geigerlab/timetag.hpp"

#include <cstdint>

namespace geigerlab {

/// Internal counters of one simulate() run.
struct SimStats {
  std::uint64_t recorded = 0;
  std::uint64_t recorded_dark = 0;
  std::uint64_t recorded_photon = 0;
  std::uint64_t recorded_afterpulse = 0;
  std::uint64_t lost_dead = 0;       // candidates inside the dead time
  std::uint64_t lost_recharge = 0;   // candidates rejected by the recharge ramp
  std::uint64_t traps_filled = 0;
};

/// Monte Carlo of the passively quenched APD over scenario.duration_s.
///
/// Dark primaries, photon primaries and trap releases are merged through one
/// time-ordered queue. A recorded avalanche blocks ceil(dead/q) ticks, after
/// which the trigger probability ramps linearly to one over the recharge time.
/// Jitter is added before quantization and before dead-time gating.
///
/// Throws ConfigError when the operating point is not in Geiger mode or the
/// circuit cannot quench at this excess bias. A failed detector or a zero
/// duration yields an empty stream.
TagStream simulate(const ApdState &apd, const OperatingPoint &op, const Scenario &scenario,
                   const QuenchCircuit &circuit, SimStats *stats = nullptr);

/// Expected direct afterpulses per recorded avalanche: capture probability times
/// the chance the release lands after the dead time and passes the recharge ramp.
/// Intervening avalanches are neglected.
double afterpulse_yield(const ApdState &apd, const QuenchCircuit &circuit);

/// Recorded rate for Poisson primaries at `primary_rate_hz` to first order in
/// rate x dead time: r / (1 - a + r (dead + recharge / 2)), a = afterpulse_yield.
double expected_recorded_rate(const ApdState &apd, const QuenchCircuit &circuit,
                              double primary_rate_hz);
/// Inverse of expected_recorded_rate.
double primary_rate_for_recorded(const ApdState &apd, const QuenchCircuit &circuit,
                                 double recorded_rate_hz);

/// Tick of pulse k for pulsed illumination: floor(k / rep_rate / q).
std::uint64_t pulse_tick(const PulsedLight &light, std::uint64_t k, double quantum_s);

} // namespace geigerlab
