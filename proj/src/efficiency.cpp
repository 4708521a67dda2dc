#include "charlab_detail.hpp"
#include "geigerlab/charlab.hpp"
#include "geigerlab/error.hpp"
#include "geigerlab/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

namespace geigerlab {

double normalized_photon_rate(const TagStream &stream, double power_before, double power_after,
                              double dark_rate_hz) {
  const double power = 0.5 * (power_before + power_after);
  if (!(power > 0))
    throw Error("relative_pde: mean laser power must be > 0");
  return (dark_count_rate(stream) - dark_rate_hz) / power;
}

RelativePde relative_pde(const TagStream &stream, double power_before, double power_after,
                         double dark_rate_hz, double baseline_rate_hz) {
  if (!(baseline_rate_hz > 0))
    throw Error("relative_pde: baseline must be > 0");
  const double norm = normalized_photon_rate(stream, power_before, power_after, dark_rate_hz);
  RelativePde r;
  r.value = norm / baseline_rate_hz;
  r.flagged = !(norm > 0);
  return r;
}

AbsolutePde absolute_pde(double count_rate_hz, double dark_rate_hz,
                         double calibrated_photon_rate_hz) {
  if (!(calibrated_photon_rate_hz > 0))
    throw Error("absolute_pde: calibrated photon rate must be > 0");
  AbsolutePde p;
  p.raw = (count_rate_hz - dark_rate_hz) / calibrated_photon_rate_hz;
  p.value = std::clamp(p.raw, 0.0, 1.0);
  p.out_of_range = p.raw < 0 || p.raw > 1;
  return p;
}

namespace {

struct Corrected {
  double rate = 0;
  double sigma = 0;
};

// Dead-time corrected rate with its Poisson error carried through the inversion.
Corrected corrected_rate(std::uint64_t counts, double duration, const QuenchCircuit &c) {
  const double m = static_cast<double>(counts) / duration;
  const double sm = std::sqrt(std::max(static_cast<double>(counts), 1.0)) / duration;
  Corrected out;
  out.rate = true_rate_from_measured(m, c.dead_time_s, c.recharge_time_s);
  const double h = std::min(0.5 * sm, 1e-3 * std::max(m, 1.0));
  const double up = true_rate_from_measured(m + h, c.dead_time_s, c.recharge_time_s);
  const double down = true_rate_from_measured(std::max(m - h, 0.0), c.dead_time_s, c.recharge_time_s);
  const double slope = (up - down) / (m + h - std::max(m - h, 0.0));
  out.sigma = slope * sm;
  return out;
}

} // namespace

EfficiencyMap efficiency_scan(const ApdState &apd, const QuenchCircuit &circuit,
                              const ScanGrid &grid, const ScanOptions &options, Execution exec) {
  if (!(grid.step_m > 0))
    throw ConfigError("scan.step_m", "must be > 0");
  if (!(grid.extent_m >= grid.step_m))
    throw ConfigError("scan.extent_m", "must be >= step_m");
  if (!(options.dwell_s > 0) || !(options.dark_dwell_s > 0))
    throw ConfigError("scan.dwell_s", "dwell times must be > 0");

  EfficiencyMap map;
  map.n = static_cast<std::size_t>(std::llround(grid.extent_m / grid.step_m));
  map.step_m = grid.step_m;
  for (std::size_t i = 0; i < map.n; ++i)
    map.coords_m.push_back((static_cast<double>(i) - 0.5 * static_cast<double>(map.n - 1)) *
                           grid.step_m);
  const std::size_t points = map.n * map.n;
  map.pde.assign(points, 0.0);
  map.pde_raw.assign(points, 0.0);
  map.sigma.assign(points, 0.0);

  const OperatingPoint op = OperatingPoint::at_excess(apd, options.temperature_c, options.v_excess_volt);

  Scenario dark;
  dark.duration_s = options.dark_dwell_s;
  dark.rng_seed = mix_seed(options.seed, points);
  const auto dark_counts = simulate(apd, op, dark, circuit).size();
  const Corrected dark_rate = corrected_rate(dark_counts, options.dark_dwell_s, circuit);
  map.dark_rate_hz = dark_rate.rate;

  auto measure = [&](std::size_t idx) {
    Scenario sc;
    sc.duration_s = options.dwell_s;
    sc.rng_seed = mix_seed(options.seed, idx);
    sc.illumination = SpotLight{map.coords_m[idx % map.n], map.coords_m[idx / map.n],
                                options.photon_rate_hz, options.spot_fwhm_m};
    const auto counts = simulate(apd, op, sc, circuit).size();
    const Corrected lit = corrected_rate(counts, options.dwell_s, circuit);
    const AbsolutePde p = absolute_pde(lit.rate, dark_rate.rate, options.photon_rate_hz);
    map.pde[idx] = p.value;
    map.pde_raw[idx] = p.raw;
    map.sigma[idx] = std::hypot(lit.sigma, dark_rate.sigma) / options.photon_rate_hz;
  };

  if (exec == Execution::Serial) {
    for (std::size_t idx = 0; idx < points; ++idx)
      measure(idx);
    return map;
  }

  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t idx = 0; idx < points; ++idx) {
    try {
      measure(idx);
    } catch (...) {
#pragma omp critical(geigerlab_scan_error)
      if (!failure)
        failure = std::current_exception();
    }
  }
  if (failure)
    std::rethrow_exception(failure);
  return map;
}

} // namespace geigerlab
