#pragma once

// Characterization algorithms operating on time-tag streams.

#include "geigerlab/apd.hpp"
#include "geigerlab/histogram.hpp"
#include "geigerlab/timetag.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace geigerlab {

// ---------------------------------------------------------------- rates

/// Events per second over the declared duration.
double dark_count_rate(const TagStream &stream);

/// Mean live-cycle length after the dead time for Poisson input at `rate_hz`
/// with a linear recharge ramp: the integral of the no-trigger survival.
double mean_wait_after_dead(double rate_hz, double recharge_s);

/// Inverts measured = 1 / (dead + mean_wait_after_dead(true)) for the true
/// Poisson rate. Throws when the measured rate is at or beyond saturation.
double true_rate_from_measured(double measured_hz, double dead_s, double recharge_s);

// ---------------------------------------------------------------- breakdown

struct BiasProbe {
  double v_bias_volt = 0;
  bool avalanche = false;
};

struct VbrMeasurement {
  double vbr_volt = 0;
  double uncertainty_volt = 0;
};

/// Midpoint of the lowest false -> true transition; uncertainty is half the gap.
VbrMeasurement measure_vbr(std::span<const BiasProbe> sweep);

/// Bisection between a known-quiet and a known-avalanching bias until the
/// half-bracket is <= tolerance.
VbrMeasurement bisect_vbr(const std::function<bool(double)> &avalanche_at, double v_quiet,
                          double v_avalanche, double tolerance_volt = 0.3);

/// Simulated oscilloscope check: any avalanche within `dwell_s` under CW light.
bool avalanche_probe(const ApdState &apd, const QuenchCircuit &circuit, double temperature_c,
                     double v_bias, double dwell_s, double photon_rate_hz, std::uint64_t seed);

// ---------------------------------------------------------------- dead time

/// Greedy post-processing dead time, per channel: keep an event iff it is at
/// least tau after the last kept event on its channel.
TagStream apply_dead_time(const TagStream &stream, double tau_s);

// ---------------------------------------------------------------- afterpulsing

struct ExcessBin {
  double lo_s = 0;
  double hi_s = 0;
  double excess_rate_hz = 0;   // normalized rate minus background
};

struct AfterpulseAnalysis {
  double dead_time_s = 0;
  double recharge_time_s = 0;
  double background_rate_hz = 0;
  double afterpulse_probability = 0;
  std::vector<double> trap_taus_s;
  std::vector<ExcessBin> excess;  // peak bin up to the plateau crossing

  /// Afterpulse probability still arriving later than tau.
  double remaining_probability(double tau_s) const;
};

struct PlateauOptions {
  double sigma_tolerance = 2.0;
  double relative_tolerance = 0.1;
};

/// Dead time, recharge, background and shaded-area probability from the
/// histogram shape. Throws Error("window too short ...") when the final
/// decade is not flat.
AfterpulseAnalysis analyze_afterpulsing(const ExpBinHistogram &hist,
                                        const PlateauOptions &plateau = {});

struct TrapFit {
  std::vector<double> taus_s;
  std::vector<double> amplitudes_hz;  // excess rate at t = 0 for each component
  std::size_t order = 0;
  double chi2 = 0;
  double aicc = 0;
  std::size_t points = 0;
};

/// Weighted nonlinear least squares of the excess rate against a sum of
/// 1..max_order exponentials (bin-averaged), order chosen by corrected AIC.
/// Throws FitError("no peak") when the histogram has no afterpulse excess.
TrapFit fit_trap_constants(const ExpBinHistogram &hist, std::size_t max_order = 3,
                           const PlateauOptions &plateau = {});

// ---------------------------------------------------------------- efficiency

struct RelativePde {
  double value = 0;
  bool flagged = false;    // corrected count rate <= 0: blind or dark-dominated
};

/// (count rate - dark) / mean laser power.
double normalized_photon_rate(const TagStream &stream, double power_before, double power_after,
                              double dark_rate_hz);

RelativePde relative_pde(const TagStream &stream, double power_before, double power_after,
                         double dark_rate_hz, double baseline_rate_hz);

struct AbsolutePde {
  double value = 0;        // clamped to [0, 1]
  double raw = 0;
  bool out_of_range = false;
};

AbsolutePde absolute_pde(double count_rate_hz, double dark_rate_hz,
                         double calibrated_photon_rate_hz = kCalibratedSourceRateHz);

struct ScanGrid {
  double extent_m = 270e-6;
  double step_m = 10e-6;
};

struct ScanOptions {
  double spot_fwhm_m = 20e-6;
  double photon_rate_hz = kCalibratedSourceRateHz;
  double dwell_s = 0.2;
  double dark_dwell_s = 2.0;
  double temperature_c = -30.0;
  double v_excess_volt = 20.0;
  std::uint64_t seed = 1;
};

enum class Execution { Serial, Parallel };

struct EfficiencyMap {
  std::size_t n = 0;                 // points per axis
  double step_m = 0;
  std::vector<double> coords_m;      // n axis coordinates, centred on 0
  std::vector<double> pde;           // row-major [iy * n + ix], clamped
  std::vector<double> pde_raw;
  std::vector<double> sigma;         // counting uncertainty of pde_raw
  double dark_rate_hz = 0;

  double at(std::size_t ix, std::size_t iy) const { return pde[iy * n + ix]; }
};

EfficiencyMap efficiency_scan(const ApdState &apd, const QuenchCircuit &circuit,
                              const ScanGrid &grid, const ScanOptions &options,
                              Execution exec = Execution::Parallel);

// ---------------------------------------------------------------- jitter

/// FWHM in seconds of the (event - nearest earlier reference) histogram with
/// one-tick bins, by linear interpolation at half the peak height. With
/// period_ticks > 0 the difference is folded into [-period/2, period/2).
double jitter_fwhm(std::span<const std::uint64_t> reference_ticks,
                   std::span<const std::uint64_t> event_ticks, double quantum_s,
                   double period_ticks = 0.0);

// ---------------------------------------------------------------- dead-time tuning

struct DeadTimeChoice {
  bool positive_key = false;
  double tau_s = 0;             // valid when positive_key
  double key_rate_proxy = 0;
  double detection_rate_hz = 0;
  double qber = 0;
};

double binary_entropy(double p);

/// Grid search over tau in [hardware dead time, window] of
/// K = R(tau) (1 - 2 H2(QBER(tau))), R = s / (1 + s tau),
/// QBER = base + remaining afterpulse probability / 2. Ties go to the smaller tau.
DeadTimeChoice optimize_dead_time(const AfterpulseAnalysis &afterpulse, double signal_rate_hz,
                                  double base_qber, double window_s = 1e-2,
                                  std::size_t grid_points = 2000);

// ---------------------------------------------------------------- full report

struct CharConfig {
  double temperature_c = -80.0;
  double v_excess_volt = 20.0;
  QuenchCircuit circuit;

  double dark_duration_s = 500.0;
  double min_dark_counts = 1e4;       // extend the dark run until this many counts
  double max_dark_duration_s = 2e5;

  bool measure_vbr = true;
  double vbr_search_halfwidth_volt = 5.0;
  double vbr_tolerance_volt = 0.3;
  double vbr_probe_dwell_s = 0.02;
  double vbr_probe_photon_rate_hz = 1e6;

  bool afterpulsing = true;
  HistogramSpec histogram;

  bool measure_pde = true;
  double pde_duration_s = 5.0;
  double photon_rate_hz = kCalibratedSourceRateHz;
  double laser_power_before = 1.0;
  double laser_power_after = 1.0;

  bool measure_jitter = true;
  double jitter_duration_s = 2.0;
  double jitter_quantum_ps = 25.0;    // scope sampling interval, finer than the tagger
  PulsedLight pulsed{40e6, 188e-12, 0.01};
};

struct CharReport {
  std::string sample_id;
  double temperature_c = 0;
  double v_excess_volt = 0;
  double vbr_volt = 0;
  double vbr_uncertainty_volt = 0;
  double dark_rate_hz = 0;
  std::uint64_t dark_counts = 0;
  double dark_duration_s = 0;
  double rel_pde = 1.0;
  bool rel_pde_flagged = false;
  std::optional<double> abs_pde;
  double normalized_photon_rate = 0;
  std::optional<double> jitter_fwhm_s;
  std::optional<AfterpulseAnalysis> afterpulse;
  std::string afterpulse_status = "not run";
  bool detector_failed = false;
  std::map<std::string, std::string> metadata;
};

/// Full characterization of a simulated detector. `baseline` (the pre-anneal
/// report) anchors rel_pde; without it rel_pde is 1.
CharReport characterize(const ApdState &apd, const CharConfig &config, std::uint64_t seed,
                        const CharReport *baseline = nullptr,
                        ExpBinHistogram *histogram_out = nullptr);

/// Report from a recorded stream alone: dark rate over the declared duration
/// and the afterpulse analysis. Fewer than 2 events gives status "insufficient data".
CharReport characterize_stream(const TagStream &stream, const HistogramSpec &spec = {},
                               ExpBinHistogram *histogram_out = nullptr);

} // namespace geigerlab
