#pragma once

// Breakdown voltage as a thermometer: linear V_br(T) calibration and the
// junction-to-thermistor thermal resistance.

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace geigerlab {

struct VbrTempPoint {
  double temperature_c = 0;
  double vbr_volt = 0;
};

struct VbrTempFit {
  double slope_volt_per_c = 0;
  double intercept_volt = 0;   // V_br at 0 C
  double r_squared = 0;
};

/// Ordinary least squares. Throws for fewer than 3 points or a single temperature.
VbrTempFit fit_vbr_temperature(std::span<const VbrTempPoint> points);

double power_dissipation(double avalanche_current_a, double vbr_volt);
/// (apd - thermistor) / power, sign kept. Throws for power <= 0.
double thermal_resistance(double apd_temp_c, double thermistor_temp_c, double power_w);
double infer_apd_temperature(const VbrTempFit &fit, double vbr_observed_volt);

struct ThermalInput {
  double v_bias_volt = 0;
  double vbr_volt = 0;
  double thermistor_temp_c = 0;
  double avalanche_current_a = 0;
};

struct ThermalRow {
  ThermalInput input;
  std::size_t line = 0;
  double apd_temp_c = 0;
  double delta_t_c = 0;
  double power_w = 0;
  std::optional<double> r_thermal_k_per_w;
  std::string error;
  double readout_resistor_ohm = 1e3;
};

struct ThermalSummary {
  std::vector<ThermalRow> rows;
  std::optional<double> median_r_thermal_k_per_w;
  bool small_thermal_resistance = false;
  std::size_t row_errors = 0;
};

/// Thermal CSV: header row with v_bias, vbr, thermistor_temp,
/// avalanche_current in any order. Malformed rows throw Error naming the line.
std::vector<std::pair<std::size_t, ThermalInput>> read_thermal_csv(std::istream &in);

/// Per-row temperature, power and R_th. Zero-power rows get a row-level error.
ThermalSummary thermal_pipeline(const VbrTempFit &fit,
                                const std::vector<std::pair<std::size_t, ThermalInput>> &rows,
                                double small_bound_k_per_w = 25.0);

void write_thermal_csv(const ThermalSummary &summary, std::ostream &out);

} // namespace geigerlab
