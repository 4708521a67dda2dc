#pragma once

// Laser-anneal response: power -> peak chip temperature -> defect healing,
// trap creation or removal, and damage. Campaigns alternate anneal steps with
// full characterizations.

#include "geigerlab/apd.hpp"
#include "geigerlab/charlab.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace geigerlab {

struct TemperatureModel {
  double ambient_c = 25.0;
  double coefficient_c_per_watt = 65.0;
  double saturation_watt = 0.0;   // > 0: rise = c P / (1 + P / P_sat)
};

/// First-order Arrhenius removal of generation centers at the peak temperature.
struct HealModel {
  double rate_prefactor_per_s = 0.0;   // nu
  double activation_energy_ev = 1.8;
};

struct AnnealResponse {
  TemperatureModel temperature;
  HealModel heal;
  // >= 0 adds coeff * f(T) to every trap density; < 0 scales it by exp(coeff * f(T)),
  // with f(T) = max(0, T - ambient) / 100 K
  double trap_creation_coeff = 0.0;
  double max_branching = 0.5;
  std::optional<double> damage_threshold_watt;
  double vbr_rise_near_damage_volt = 1.0;
  double near_damage_fraction = 0.9;

  void validate() const;
};

struct AnnealStep {
  double power_watt = 0.0;
  double exposure_s = 60.0;
  double cooldown_s = 60.0;
  bool followed_by_characterization = true;
  std::optional<double> temperature_override_c;   // thermal anneal: skip the power map

  void validate() const;
};

double peak_temperature(const AnnealResponse &resp, double power_watt);

/// n_tgc multiplier of one exposure at the given peak temperature, in (0, 1].
double heal_factor(const AnnealResponse &resp, double peak_temperature_c, double exposure_s);

/// Deterministic state update. A failed detector is returned unchanged.
ApdState apply_anneal(const ApdState &apd, const AnnealResponse &resp, const AnnealStep &step);

/// Product of modeled n_tgc multipliers over the plan (damage ignored).
double plan_dark_factor(const AnnealResponse &resp, const std::vector<AnnealStep> &plan);

/// Heal prefactor nu such that the plan reduces n_tgc by `reduction_factor`.
double calibrate_heal_rate(const AnnealResponse &resp, const std::vector<AnnealStep> &plan,
                           double reduction_factor);

/// Stepwise plan: increments of `step_watt` up to and including `final_watt`.
std::vector<AnnealStep> stepwise_plan(double final_watt, double step_watt = 0.2);

// ---------------------------------------------------------------- campaigns

struct StopRules {
  bool halt_on_failure = true;
  double max_vbr_rise_volt = 0.75;
  double min_step_reduction = 0.0;   // relative; 0 disables
};

struct CampaignEntry {
  AnnealStep step;
  double peak_temperature_c = 0;
  ApdState state;
  std::optional<CharReport> report;
};

struct Table1Row {
  std::string sample;
  double before_hz = 0;
  double lowest_after_hz = 0;
  double reduction_factor = 0;
  double power_w = 0;
  double v_excess_volt = 0;
};

struct CampaignLog {
  std::string sample_id;
  ApdState initial_state;
  CharReport initial;
  std::vector<CampaignEntry> entries;
  std::string stop_reason = "completed";
  std::uint64_t seed = 0;

  /// Lowest dark rate among characterized, non-failed steps; nullopt when none.
  std::optional<std::size_t> lowest_entry() const;
  Table1Row summary() const;
};

/// Initial characterization, then each step with its characterization, until
/// the plan ends or a stop rule fires. A failing characterization is rethrown
/// as Error naming the step index.
CampaignLog run_campaign(const ApdState &apd, const AnnealResponse &resp,
                         const std::vector<AnnealStep> &plan, const CharConfig &config,
                         const StopRules &rules, std::uint64_t seed);

} // namespace geigerlab
