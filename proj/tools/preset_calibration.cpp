#include "preset_calibration.hpp"

#include "geigerlab/simulate.hpp"

#include <cmath>
#include <cstring>

namespace geigerlab::calibration {

namespace {

std::vector<double> steps_to(double watts) {
  std::vector<double> out;
  for (const auto &s : stepwise_plan(watts, 0.2))
    out.push_back(s.power_watt);
  return out;
}

} // namespace

const std::vector<SampleTarget> &published_samples() {
  static const std::vector<SampleTarget> samples = {
      {"c30902sh-1-pre", "C30902SH-1", ApdModel::C30902SH, 347, 2.3, 150, 0.8, 14, steps_to(0.8)},
      {"c30902sh-2-pre", "C30902SH-2", ApdModel::C30902SH, 363, 2.64, 137, 1.5, 14, {0.8, 1.5}},
      {"slik-1-pre", "SLiK-1", ApdModel::SLiK, 6.71, 0.16, 41.7, 1.4, 14, steps_to(1.4)},
      {"slik-2-pre", "SLiK-2", ApdModel::SLiK, 2.19, 0.42, 5.3, 0.8, 14, steps_to(0.8)},
      {"slik-3-pre", "SLiK-3", ApdModel::SLiK, 43.1, 2.09, 21, 1.4, 14, steps_to(1.4)},
      {"slik-4-pre", "SLiK-4", ApdModel::SLiK, 192, 8.3, 23, 1.0, 20, {1.0}},
      {"slik-5-pre", "SLiK-5", ApdModel::SLiK, 447, 58, 7.7, 1.0, 20, {1.0}},
      {"sap500s2-1-pre", "SAP500S2-1", ApdModel::SAP500S2, 1579, 2.08, 758, 1.4, 20, steps_to(1.4)},
      {"sap500s2-2-pre", "SAP500S2-2", ApdModel::SAP500S2, 213, 1.66, 128, 1.6, 20, steps_to(1.6)},
  };
  return samples;
}

std::optional<double> damage_threshold(const SampleTarget &t) {
  switch (t.model) {
  case ApdModel::SLiK:
    return 3.5;
  case ApdModel::SAP500S2:
    return std::strcmp(t.sample, "SAP500S2-1") == 0 ? 1.6 : 1.8;
  case ApdModel::C30902SH:
    break;
  }
  return std::nullopt;
}

Preset calibrate(const SampleTarget &t) {
  Preset p;
  p.name = t.preset;
  ApdState &a = p.apd;
  a.sample_id = t.sample;
  a.model_id = t.model;
  AnnealResponse &r = p.anneal;
  switch (t.model) {
  case ApdModel::C30902SH:
    a.vbr = {225.0, 0.7, 25.0};
    a.traps = {{1.0, 0.5e-6, 0.004}};
    a.pde_base = 0.45;
    a.jitter_sigma_s = 250e-12;
    a.active_area_diameter_m = 500e-6;
    r.trap_creation_coeff = 0.5;
    break;
  case ApdModel::SLiK:
    a.vbr = {294.0, 0.75, 20.0};
    a.traps = {{1.0, 0.4e-6, 0.01}};
    a.pde_base = 0.6;
    a.jitter_sigma_s = 150e-12;
    a.active_area_diameter_m = 180e-6;
    r.trap_creation_coeff = 0.6;
    break;
  case ApdModel::SAP500S2:
    a.vbr = {120.0, 0.5, 25.0};
    a.traps = {{1.0, 0.3e-6, 0.35}};
    a.pde_base = 0.55;
    a.jitter_sigma_s = 100e-12;
    a.active_area_diameter_m = 500e-6;
    r.trap_creation_coeff = -0.3;
    break;
  }
  r.damage_threshold_watt = damage_threshold(t);
  for (double w : t.plan_watts) {
    AnnealStep s;
    s.power_watt = w;
    p.plan.push_back(s);
  }

  // published rates are recorded rates: strip afterpulses and dead-time loss
  const double temperature_c = -80.0;
  const OperatingPoint op = OperatingPoint::at_excess(a, temperature_c, t.v_excess_volt);
  a.n_tgc = 1.0;
  const double unit_rate = dark_rate_model(a, op);
  const double primary_before = primary_rate_for_recorded(a, p.circuit, t.before_hz);
  a.n_tgc = primary_before / unit_rate;

  // trap densities after the plan do not depend on the heal rate
  ApdState after = a;
  for (const auto &step : p.plan)
    after = apply_anneal(after, r, step);
  const double primary_after = primary_rate_for_recorded(after, p.circuit, t.lowest_after_hz);
  r.heal.rate_prefactor_per_s = calibrate_heal_rate(r, p.plan, primary_before / primary_after);

  p.characterization.temperature_c = temperature_c;
  p.characterization.v_excess_volt = t.v_excess_volt;
  p.characterization.circuit = p.circuit;
  p.reference = {t.sample, t.before_hz, t.lowest_after_hz, t.reduction_factor, t.power_w,
                 t.v_excess_volt};
  a.validate();
  return p;
}

std::vector<Preset> calibrate_all() {
  std::vector<Preset> out;
  for (const auto &t : published_samples())
    out.push_back(calibrate(t));
  return out;
}

} // namespace geigerlab::calibration
