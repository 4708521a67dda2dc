#include "geigerlab/anneal.hpp"
#include "geigerlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace geigerlab {

void AnnealResponse::validate() const {
  if (!(temperature.coefficient_c_per_watt > 0))
    throw ConfigError("anneal.temperature.coefficient_c_per_watt", "must be > 0");
  if (!(temperature.saturation_watt >= 0))
    throw ConfigError("anneal.temperature.saturation_watt", "must be >= 0");
  if (!(heal.rate_prefactor_per_s >= 0))
    throw ConfigError("anneal.heal.rate_prefactor_per_s", "must be >= 0");
  if (!(heal.activation_energy_ev > 0))
    throw ConfigError("anneal.heal.activation_energy_ev", "must be > 0");
  if (!(max_branching > 0 && max_branching < 1))
    throw ConfigError("anneal.max_branching", "must be in (0, 1)");
  if (damage_threshold_watt && !(*damage_threshold_watt > 0))
    throw ConfigError("anneal.damage_threshold_watt", "must be > 0");
  if (!(near_damage_fraction > 0 && near_damage_fraction <= 1))
    throw ConfigError("anneal.near_damage_fraction", "must be in (0, 1]");
}

void AnnealStep::validate() const {
  if (!(power_watt >= 0))
    throw ConfigError("step.power_watt", "must be >= 0");
  if (!(exposure_s > 0))
    throw ConfigError("step.exposure_s", "must be > 0");
  if (!(cooldown_s >= 0))
    throw ConfigError("step.cooldown_s", "must be >= 0");
}

double peak_temperature(const AnnealResponse &resp, double power_watt) {
  if (!(power_watt >= 0))
    throw Error("peak_temperature: power must be >= 0");
  const auto &t = resp.temperature;
  double rise = t.coefficient_c_per_watt * power_watt;
  if (t.saturation_watt > 0)
    rise /= 1.0 + power_watt / t.saturation_watt;
  return t.ambient_c + rise;
}

double heal_factor(const AnnealResponse &resp, double peak_temperature_c, double exposure_s) {
  const double kt = kBoltzmannEvPerK * (peak_temperature_c + kZeroCelsiusK);
  const double h = std::exp(-resp.heal.rate_prefactor_per_s * exposure_s *
                            std::exp(-resp.heal.activation_energy_ev / kt));
  // exp underflows far above the calibrated powers; keep the factor strictly positive
  return std::max(h, std::numeric_limits<double>::min());
}

namespace {

double step_temperature(const AnnealResponse &resp, const AnnealStep &step) {
  return step.temperature_override_c ? *step.temperature_override_c
                                     : peak_temperature(resp, step.power_watt);
}

bool is_noop(const AnnealStep &step) {
  return step.power_watt == 0 && !step.temperature_override_c;
}

} // namespace

ApdState apply_anneal(const ApdState &apd, const AnnealResponse &resp, const AnnealStep &step) {
  step.validate();
  if (apd.failed || is_noop(step))
    return apd;
  ApdState out = apd;
  const double t_peak = step_temperature(resp, step);
  out.n_tgc *= heal_factor(resp, t_peak, step.exposure_s);

  const double f = std::max(0.0, t_peak - resp.temperature.ambient_c) / 100.0;
  for (auto &trap : out.traps) {
    if (resp.trap_creation_coeff >= 0)
      trap.density += resp.trap_creation_coeff * f;
    else
      trap.density *= std::exp(resp.trap_creation_coeff * f);
  }
  // keep afterpulse cascades subcritical
  const double branching = out.branching_ratio();
  if (branching > resp.max_branching) {
    // rescale capture probabilities, not raw densities: capture saturates at 1
    const double scale = resp.max_branching / branching;
    for (auto &trap : out.traps)
      if (trap.fill_prob > 0)
        trap.density = trap.capture_probability() * scale / trap.fill_prob;
  }

  if (resp.damage_threshold_watt && !step.temperature_override_c) {
    const double threshold = *resp.damage_threshold_watt;
    if (step.power_watt >= threshold)
      out.failed = true;
    else if (step.power_watt >= resp.near_damage_fraction * threshold)
      out.vbr.intercept_volt += resp.vbr_rise_near_damage_volt;
  }
  return out;
}

double plan_dark_factor(const AnnealResponse &resp, const std::vector<AnnealStep> &plan) {
  double factor = 1.0;
  for (const auto &step : plan)
    if (!is_noop(step))
      factor *= heal_factor(resp, step_temperature(resp, step), step.exposure_s);
  return factor;
}

double calibrate_heal_rate(const AnnealResponse &resp, const std::vector<AnnealStep> &plan,
                           double reduction_factor) {
  if (!(reduction_factor >= 1))
    throw Error("calibrate_heal_rate: reduction factor must be >= 1");
  // ln(reduction) = nu * sum(exposure * exp(-E / kT)), linear in nu
  double exposure = 0;
  for (const auto &step : plan)
    if (!is_noop(step))
      exposure += step.exposure_s * std::exp(-resp.heal.activation_energy_ev /
                                             (kBoltzmannEvPerK * (step_temperature(resp, step) + kZeroCelsiusK)));
  if (!(exposure > 0)) {
    if (reduction_factor == 1)
      return 0.0;
    throw Error("calibrate_heal_rate: plan has no heating step");
  }
  return std::log(reduction_factor) / exposure;
}

std::vector<AnnealStep> stepwise_plan(double final_watt, double step_watt) {
  if (!(final_watt > 0) || !(step_watt > 0))
    throw Error("stepwise_plan: powers must be > 0");
  std::vector<AnnealStep> plan;
  const auto n = static_cast<int>(std::llround(final_watt / step_watt));
  for (int i = 1; i <= n; ++i) {
    AnnealStep step;
    step.power_watt = i == n ? final_watt : step_watt * i;
    plan.push_back(step);
  }
  if (plan.empty()) {
    AnnealStep step;
    step.power_watt = final_watt;
    plan.push_back(step);
  }
  return plan;
}

} // namespace geigerlab
