#include "geigerlab/apd.hpp"

#include "geigerlab/error.hpp"

#include <cmath>

namespace geigerlab {

std::string_view to_string(ApdModel m) {
  switch (m) {
  case ApdModel::C30902SH:
    return "C30902SH";
  case ApdModel::SLiK:
    return "SLiK";
  case ApdModel::SAP500S2:
    return "SAP500S2";
  }
  return "?";
}

ApdModel apd_model_from_string(std::string_view s) {
  if (s == "C30902SH")
    return ApdModel::C30902SH;
  if (s == "SLiK")
    return ApdModel::SLiK;
  if (s == "SAP500S2")
    return ApdModel::SAP500S2;
  throw ConfigError("model_id", "unknown APD model '" + std::string(s) + "'");
}

void QuenchCircuit::validate() const {
  if (!(r1_ohm > 0))
    throw ConfigError("circuit.r1_ohm", "must be > 0");
  if (!(r2_ohm > 0))
    throw ConfigError("circuit.r2_ohm", "must be > 0");
  if (!(latch_current_amp > 0))
    throw ConfigError("circuit.latch_current_amp", "must be > 0");
  if (!(dead_time_s > 0))
    throw ConfigError("circuit.dead_time_s", "must be > 0");
  if (!(recharge_time_s >= 0))
    throw ConfigError("circuit.recharge_time_s", "must be >= 0");
}

double steady_state_current(const QuenchCircuit &circuit, double v_excess) {
  return v_excess / circuit.r1_ohm;
}

bool can_quench(const QuenchCircuit &circuit, double v_excess) {
  return steady_state_current(circuit, v_excess) < circuit.latch_current_amp;
}

double TrapSpecies::capture_probability() const {
  return std::min(1.0, std::max(0.0, fill_prob * density));
}

void ApdState::validate() const {
  if (!(n_tgc >= 0))
    throw ConfigError("apd.n_tgc", "must be >= 0");
  if (!(pde_base >= 0 && pde_base <= 1))
    throw ConfigError("apd.pde_base", "must be in [0, 1]");
  if (!(jitter_sigma_s >= 0))
    throw ConfigError("apd.jitter_sigma_s", "must be >= 0");
  if (!(active_area_diameter_m > 0))
    throw ConfigError("apd.active_area_diameter_m", "must be > 0");
  if (!(dark.activation_energy_ev > 0))
    throw ConfigError("apd.dark.activation_energy_ev", "must be > 0");
  if (!(dark.reference_excess_volt > 0) || !(dark.excess_exponent > 0))
    throw ConfigError("apd.dark", "excess-bias scaling must be strictly increasing");
  for (std::size_t i = 0; i < traps.size(); ++i) {
    const auto &t = traps[i];
    const std::string p = "apd.traps[" + std::to_string(i) + "]";
    if (!(t.density >= 0))
      throw ConfigError(p + ".density", "must be >= 0");
    if (!(t.release_tau_s > 0))
      throw ConfigError(p + ".release_tau_s", "must be > 0");
    if (!(t.fill_prob >= 0 && t.fill_prob <= 1))
      throw ConfigError(p + ".fill_prob", "must be in [0, 1]");
  }
  if (!(branching_ratio() < 1.0))
    throw ConfigError("apd.traps", "afterpulse branching ratio must be < 1");
}

double ApdState::branching_ratio() const {
  double m = 0;
  for (const auto &t : traps)
    m += t.capture_probability();
  return m;
}

OperatingPoint OperatingPoint::at_excess(const ApdState &apd, double temperature_c,
                                         double v_excess) {
  return {temperature_c, breakdown_voltage(apd, temperature_c) + v_excess};
}

double breakdown_voltage(const ApdState &apd, double temperature_c) {
  return apd.vbr.intercept_volt +
         apd.vbr.slope_volt_per_kelvin * (temperature_c - apd.vbr.reference_temperature_c);
}

double excess_voltage(const ApdState &apd, const OperatingPoint &op) {
  return op.v_bias_volt - breakdown_voltage(apd, op.temperature_c);
}

double dark_rate_model(const ApdState &apd, const OperatingPoint &op) {
  const double v = excess_voltage(apd, op);
  if (v <= 0 || apd.n_tgc <= 0)
    return 0.0;
  const double t = op.temperature_c + kZeroCelsiusK;
  const double t_ref = apd.dark.reference_temperature_c + kZeroCelsiusK;
  const double thermal =
      std::exp(-apd.dark.activation_energy_ev / kBoltzmannEvPerK * (1.0 / t - 1.0 / t_ref));
  const double field = std::pow(v / apd.dark.reference_excess_volt, apd.dark.excess_exponent);
  return apd.n_tgc * thermal * field;
}

double detection_efficiency(const ApdState &apd, double v_excess) {
  if (v_excess <= 0)
    return 0.0;
  if (apd.pde_saturation_volt <= 0)
    return apd.pde_base;
  const double vs = apd.pde_saturation_volt;
  const double shape =
      (1.0 - std::exp(-v_excess / vs)) / (1.0 - std::exp(-apd.pde_reference_excess_volt / vs));
  return std::clamp(apd.pde_base * shape, 0.0, 1.0);
}

void Scenario::validate() const {
  if (!(duration_s >= 0) || !std::isfinite(duration_s))
    throw ConfigError("scenario.duration_s", "must be >= 0");
  if (!(quantum_ps > 0) || !std::isfinite(quantum_ps))
    throw ConfigError("scenario.quantum_ps", "must be > 0");
  std::visit(
      [](const auto &light) {
        using T = std::decay_t<decltype(light)>;
        if constexpr (std::is_same_v<T, CwLight>) {
          if (!(light.photon_rate_hz >= 0))
            throw ConfigError("scenario.illumination.photon_rate_hz", "must be >= 0");
        } else if constexpr (std::is_same_v<T, PulsedLight>) {
          if (!(light.rep_rate_hz > 0))
            throw ConfigError("scenario.illumination.rep_rate_hz", "must be > 0");
          if (!(light.pulse_fwhm_s >= 0))
            throw ConfigError("scenario.illumination.pulse_fwhm_s", "must be >= 0");
          if (!(light.mean_photons_per_pulse >= 0))
            throw ConfigError("scenario.illumination.mean_photons_per_pulse", "must be >= 0");
        } else if constexpr (std::is_same_v<T, SpotLight>) {
          if (!(light.photon_rate_hz >= 0))
            throw ConfigError("scenario.illumination.photon_rate_hz", "must be >= 0");
          if (!(light.beam_fwhm_m >= 0))
            throw ConfigError("scenario.illumination.beam_fwhm_m", "must be >= 0");
        }
      },
      illumination);
}

} // namespace geigerlab
