#include "charlab_detail.hpp"
#include "geigerlab/charlab.hpp"
#include "geigerlab/error.hpp"
#include "geigerlab/simulate.hpp"
#include "geigerlab/util.hpp"

#include <algorithm>
#include <cmath>

namespace geigerlab {

namespace {

// seed streams for the individual runs of one characterization
enum Stage : std::uint64_t { kVbr = 0, kDark = 1, kDarkExtended = 2, kPde = 3, kJitter = 4 };

void add_afterpulsing(const TagStream &stream, const HistogramSpec &spec, CharReport &report,
                      ExpBinHistogram *histogram_out) {
  if (stream.size() < 2) {
    report.afterpulse_status = "insufficient data";
    return;
  }
  ExpBinHistogram hist = afterpulse_histogram(stream, spec);
  if (histogram_out)
    *histogram_out = hist;
  if (hist.total() == 0) {
    report.afterpulse_status = "insufficient data";
    return;
  }
  try {
    AfterpulseAnalysis a = analyze_afterpulsing(hist);
    if (a.afterpulse_probability > 0) {
      try {
        a.trap_taus_s = fit_trap_constants(hist).taus_s;
      } catch (const FitError &) {
        // probability stands; time constants stay unresolved
      }
    }
    report.afterpulse = std::move(a);
    report.afterpulse_status = "ok";
  } catch (const Error &e) {
    const std::string what = e.what();
    const auto colon = what.find(": ");
    report.afterpulse_status = colon == std::string::npos ? what : what.substr(colon + 2);
  }
}

} // namespace

CharReport characterize_stream(const TagStream &stream, const HistogramSpec &spec,
                               ExpBinHistogram *histogram_out) {
  CharReport r;
  const auto &md = stream.header.metadata;
  auto get = [&](const char *key) -> std::string {
    const auto it = md.find(key);
    return it == md.end() ? std::string{} : it->second;
  };
  r.sample_id = get("sample_id");
  if (const auto t = get("temperature_c"); !t.empty())
    r.temperature_c = std::stod(t);
  if (const auto v = get("v_excess_volt"); !v.empty())
    r.v_excess_volt = std::stod(v);
  r.detector_failed = get("detector_failed") == "true";
  r.dark_counts = stream.size();
  r.dark_duration_s = stream.duration_s();
  r.dark_rate_hz = stream.duration_s() > 0 ? dark_count_rate(stream) : 0.0;
  r.metadata["source"] = "stream";
  add_afterpulsing(stream, spec, r, histogram_out);
  return r;
}

CharReport characterize(const ApdState &apd, const CharConfig &config, std::uint64_t seed,
                        const CharReport *baseline, ExpBinHistogram *histogram_out) {
  CharReport r;
  r.sample_id = apd.sample_id;
  r.temperature_c = config.temperature_c;
  r.v_excess_volt = config.v_excess_volt;
  r.metadata["seed"] = std::to_string(seed);
  if (apd.failed) {
    r.detector_failed = true;
    r.afterpulse_status = "detector failed";
    r.rel_pde = 0.0;
    r.rel_pde_flagged = true;
    return r;
  }
  const QuenchCircuit &circuit = config.circuit;
  const double vbr_true = breakdown_voltage(apd, config.temperature_c);
  const OperatingPoint op{config.temperature_c, vbr_true + config.v_excess_volt};
  if (!can_quench(circuit, config.v_excess_volt))
    throw ConfigError("characterize.v_excess_volt",
                      "circuit cannot quench at this excess bias (latch current exceeded)");

  if (config.measure_vbr) {
    std::uint64_t probe = 0;
    auto avalanche_at = [&](double v) {
      return avalanche_probe(apd, circuit, config.temperature_c, v, config.vbr_probe_dwell_s,
                             config.vbr_probe_photon_rate_hz,
                             mix_seed(mix_seed(seed, kVbr), probe++));
    };
    const VbrMeasurement m =
        bisect_vbr(avalanche_at, vbr_true - config.vbr_search_halfwidth_volt,
                   vbr_true + config.vbr_search_halfwidth_volt, config.vbr_tolerance_volt);
    r.vbr_volt = m.vbr_volt;
    r.vbr_uncertainty_volt = m.uncertainty_volt;
  } else {
    r.vbr_volt = vbr_true;
  }

  // dark run, extended when too few counts for a tight estimate
  Scenario dark;
  dark.duration_s = config.dark_duration_s;
  dark.rng_seed = mix_seed(seed, kDark);
  TagStream dark_stream = simulate(apd, op, dark, circuit);
  if (static_cast<double>(dark_stream.size()) < config.min_dark_counts &&
      config.max_dark_duration_s > config.dark_duration_s) {
    double extended = config.max_dark_duration_s;
    if (!dark_stream.empty()) {
      const double rate = static_cast<double>(dark_stream.size()) / config.dark_duration_s;
      extended = std::min(config.max_dark_duration_s, config.min_dark_counts / rate);
    }
    if (extended > config.dark_duration_s) {
      dark.duration_s = extended;
      dark.rng_seed = mix_seed(seed, kDarkExtended);
      dark_stream = simulate(apd, op, dark, circuit);
    }
  }
  r.dark_counts = dark_stream.size();
  r.dark_duration_s = dark.duration_s;
  r.dark_rate_hz = dark.duration_s > 0 ? dark_count_rate(dark_stream) : 0.0;

  if (config.afterpulsing)
    add_afterpulsing(dark_stream, config.histogram, r, histogram_out);

  if (config.measure_pde) {
    Scenario lit;
    lit.duration_s = config.pde_duration_s;
    lit.illumination = CwLight{config.photon_rate_hz};
    lit.rng_seed = mix_seed(seed, kPde);
    const TagStream s = simulate(apd, op, lit, circuit);
    const double dead = circuit.dead_time_s, ramp = circuit.recharge_time_s;
    const double count_true = true_rate_from_measured(dark_count_rate(s), dead, ramp);
    const double dark_true = true_rate_from_measured(r.dark_rate_hz, dead, ramp);
    r.abs_pde = absolute_pde(count_true, dark_true, config.photon_rate_hz).value;
    r.normalized_photon_rate = normalized_photon_rate(s, config.laser_power_before,
                                                      config.laser_power_after, r.dark_rate_hz);
    if (baseline && baseline->normalized_photon_rate > 0) {
      const RelativePde rel =
          relative_pde(s, config.laser_power_before, config.laser_power_after, r.dark_rate_hz,
                       baseline->normalized_photon_rate);
      r.rel_pde = rel.value;
      r.rel_pde_flagged = rel.flagged;
    } else {
      r.rel_pde = 1.0;
      r.rel_pde_flagged = !(r.normalized_photon_rate > 0);
    }
  }

  if (config.measure_jitter) {
    Scenario pulsed;
    pulsed.duration_s = config.jitter_duration_s;
    pulsed.illumination = config.pulsed;
    pulsed.rng_seed = mix_seed(seed, kJitter);
    pulsed.quantum_ps = config.jitter_quantum_ps;
    const TagStream s = simulate(apd, op, pulsed, circuit);
    const std::uint64_t ref[] = {0};
    const double period = 1.0 / (config.pulsed.rep_rate_hz * s.quantum_s());
    try {
      r.jitter_fwhm_s = jitter_fwhm(ref, s.ticks(), s.quantum_s(), period);
    } catch (const Error &) {
      r.metadata["jitter"] = "too few events";
    }
  }
  return r;
}

} // namespace geigerlab
