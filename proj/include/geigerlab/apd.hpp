#pragma once

// Phenomenological Geiger-mode APD: circuit constants, defect state and the
// closed-form rate models the simulator draws from.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace geigerlab {

inline constexpr double kBoltzmannEvPerK = 8.617333262e-5;
inline constexpr double kZeroCelsiusK = 273.15;

enum class ApdModel { C30902SH, SLiK, SAP500S2 };

std::string_view to_string(ApdModel m);
ApdModel apd_model_from_string(std::string_view s);

/// Passive quench: R1 in series, R2 sense resistor into the 50 ohm line.
struct QuenchCircuit {
  double r1_ohm = 400e3;
  double r2_ohm = 50.0;
  double latch_current_amp = 100e-6;
  double dead_time_s = 0.8e-6;
  double recharge_time_s = 150e-9;

  void validate() const;
};

/// Current through R1 once the diode sits at V_br: v_excess / R1.
double steady_state_current(const QuenchCircuit &circuit, double v_excess);
/// Quenching succeeds when the steady-state current stays below the latch current.
bool can_quench(const QuenchCircuit &circuit, double v_excess);

struct VbrModel {
  double intercept_volt = 0.0;          // V_br at reference_temperature_c
  double slope_volt_per_kelvin = 0.0;
  double reference_temperature_c = 0.0;
};

/// lambda_dark = n_tgc * exp(-Ea/k (1/T - 1/T_ref)) * (v_excess / v_ref)^exponent.
/// n_tgc therefore reads as the dark rate in Hz at (T_ref, v_ref).
struct DarkModel {
  double activation_energy_ev = 0.6;
  double reference_temperature_c = -80.0;
  double reference_excess_volt = 20.0;
  double excess_exponent = 1.0;
};

struct TrapSpecies {
  double density = 1.0;          // dimensionless, scales fill_prob
  double release_tau_s = 1e-6;
  double fill_prob = 0.0;        // per avalanche, at density 1

  /// Probability this species captures a carrier in one avalanche.
  double capture_probability() const;
};

struct ApdState {
  std::string sample_id;
  ApdModel model_id = ApdModel::SLiK;
  VbrModel vbr;
  DarkModel dark;
  double n_tgc = 0.0;
  std::vector<TrapSpecies> traps;
  double pde_base = 0.5;                 // P_de at pde_reference_excess_volt
  double pde_reference_excess_volt = 20.0;
  double pde_saturation_volt = 5.0;      // 0 disables the excess-bias dependence
  double jitter_sigma_s = 150e-12;
  double active_area_diameter_m = 500e-6;
  bool failed = false;

  void validate() const;
  /// Mean afterpulse-trap captures per avalanche; kept < 1 so cascades terminate.
  double branching_ratio() const;
};

struct OperatingPoint {
  double temperature_c = -80.0;
  double v_bias_volt = 0.0;

  static OperatingPoint at_excess(const ApdState &apd, double temperature_c, double v_excess);
};

double breakdown_voltage(const ApdState &apd, double temperature_c);
double excess_voltage(const ApdState &apd, const OperatingPoint &op);

/// Thermal dark-count generation rate in Hz. Zero outside Geiger mode.
double dark_rate_model(const ApdState &apd, const OperatingPoint &op);
/// Photon detection efficiency at the given excess bias, in [0, 1].
double detection_efficiency(const ApdState &apd, double v_excess);

struct NoLight {};
struct CwLight {
  double photon_rate_hz = 48.8e3;
};
struct PulsedLight {
  double rep_rate_hz = 40e6;
  double pulse_fwhm_s = 188e-12;
  double mean_photons_per_pulse = 0.1;
};
struct SpotLight {
  double x_m = 0.0;
  double y_m = 0.0;
  double photon_rate_hz = 48.8e3;
  double beam_fwhm_m = 20e-6;
};
using Illumination = std::variant<NoLight, CwLight, PulsedLight, SpotLight>;

struct Scenario {
  double duration_s = 500.0;
  Illumination illumination = NoLight{};
  std::uint64_t rng_seed = 1;
  double quantum_ps = 156.25;   // tick of the recorded stream

  void validate() const;
};

inline constexpr double kCalibratedSourceRateHz = 48.8e3;
inline constexpr double kFwhmPerSigma = 2.3548200450309493; // 2 sqrt(2 ln 2)

} // namespace geigerlab
