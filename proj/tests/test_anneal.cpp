#include "doctest.h"

#include "geigerlab/anneal.hpp"
#include "geigerlab/config.hpp"
#include "geigerlab/error.hpp"
#include "geigerlab/simulate.hpp"
#include "support.hpp"

#include <cmath>
#include <random>

using namespace geigerlab;

namespace {

double modeled_recorded_rate(const Preset &p, const ApdState &state) {
  const auto op = OperatingPoint::at_excess(state, p.characterization.temperature_c,
                                            p.characterization.v_excess_volt);
  return expected_recorded_rate(state, p.circuit, dark_rate_model(state, op));
}

ApdState run_plan(const ApdState &apd, const AnnealResponse &resp,
                  const std::vector<AnnealStep> &plan) {
  ApdState s = apd;
  for (const auto &step : plan)
    s = apply_anneal(s, resp, step);
  return s;
}

/// Quick characterization: dark rate and V_br only.
CharConfig quick_config(const Preset &p) {
  CharConfig c = p.characterization;
  c.afterpulsing = c.measure_pde = c.measure_jitter = false;
  return c;
}

} // namespace

TEST_CASE("peak temperature map") {
  AnnealResponse r;
  CHECK(peak_temperature(r, 0.0) == 25.0);
  CHECK(std::abs(peak_temperature(r, 1.0) - 90.0) <= 5.0);
  double prev = -1e9;
  for (double w = 0.2; w <= 3.5 + 1e-9; w += 0.1) {
    CHECK(peak_temperature(r, w) > prev);
    prev = peak_temperature(r, w);
  }
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  r.temperature.saturation_watt = 2.0;
  for (int i = 0; i < 1000; ++i) {
    const double a = u(rng), b = u(rng);
    if (a < b)
      CHECK(peak_temperature(r, a) < peak_temperature(r, b));
  }
  CHECK_THROWS_AS(peak_temperature(r, -0.1), Error);
}

TEST_CASE("heal factor lies in (0, 1] and falls with temperature") {
  AnnealResponse r;
  r.heal.rate_prefactor_per_s = 1e22;
  double prev = 1.0;
  for (double t = 25; t <= 300; t += 5) {
    const double h = heal_factor(r, t, 60);
    CHECK(h > 0);
    CHECK(h <= prev);
    prev = h;
  }
  r.heal.rate_prefactor_per_s = 0;
  CHECK(heal_factor(r, 200, 60) == 1.0);
}

TEST_CASE("zero power leaves the state unchanged and is deterministic") {
  const Preset p = load_preset("slik-1-pre");
  AnnealStep off;
  off.power_watt = 0;
  const ApdState s = apply_anneal(p.apd, p.anneal, off);
  CHECK(s.n_tgc == p.apd.n_tgc);
  CHECK(s.traps[0].density == p.apd.traps[0].density);
  CHECK(s.vbr.intercept_volt == p.apd.vbr.intercept_volt);
  AnnealStep on;
  on.power_watt = 1.2;
  const ApdState a1 = apply_anneal(p.apd, p.anneal, on), a2 = apply_anneal(p.apd, p.anneal, on);
  CHECK(a1.n_tgc == a2.n_tgc);
  CHECK(a1.traps[0].density == a2.traps[0].density);
  AnnealStep neg;
  neg.power_watt = -1;
  CHECK_THROWS_AS(apply_anneal(p.apd, p.anneal, neg), ConfigError);
}

TEST_CASE("damage threshold and near-damage V_br rise") {
  const Preset p = load_preset("slik-2-pre");
  AnnealStep step;
  step.power_watt = 3.5;
  CHECK(apply_anneal(p.apd, p.anneal, step).failed);
  step.power_watt = 3.3;
  const ApdState near = apply_anneal(p.apd, p.anneal, step);
  CHECK_FALSE(near.failed);
  CHECK(near.vbr.intercept_volt == doctest::Approx(p.apd.vbr.intercept_volt + 1.0));
  step.power_watt = 3.0;
  CHECK(apply_anneal(p.apd, p.anneal, step).vbr.intercept_volt == p.apd.vbr.intercept_volt);
  // annealing a failed device is a no-op
  ApdState dead = p.apd;
  dead.failed = true;
  step.power_watt = 1.0;
  CHECK(apply_anneal(dead, p.anneal, step).n_tgc == dead.n_tgc);
}

TEST_CASE("SAP500S2-1 plan takes the modeled rate from 1579 Hz to 2.08 Hz") {
  const Preset p = load_preset("sap500s2-1-pre");
  REQUIRE(p.plan.back().power_watt == doctest::Approx(1.4));
  const double before = modeled_recorded_rate(p, p.apd);
  const double after = modeled_recorded_rate(p, run_plan(p.apd, p.anneal, p.plan));
  CHECK(before == doctest::Approx(1579).epsilon(1e-6));
  CHECK(after == doctest::Approx(2.08).epsilon(1e-6));
  CHECK(before / after == doctest::Approx(758).epsilon(0.01));
}

TEST_CASE("below damage, n_tgc never increases and trap densities move by family") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (const auto &name : preset_names()) {
    const Preset p = load_preset(name);
    ApdState s = p.apd;
    for (int i = 0; i < 20; ++i) {
      AnnealStep step;
      step.power_watt = u(rng);
      if (p.anneal.damage_threshold_watt && step.power_watt >= *p.anneal.damage_threshold_watt)
        continue;
      const ApdState next = apply_anneal(s, p.anneal, step);
      CHECK(next.n_tgc <= s.n_tgc);
      if (p.anneal.trap_creation_coeff >= 0)
        CHECK(next.traps[0].density >= s.traps[0].density);
      else
        CHECK(next.traps[0].density <= s.traps[0].density);
      CHECK(next.branching_ratio() <= p.anneal.max_branching + 1e-12);
      s = next;
    }
  }
}

TEST_CASE("trap creation is capped at the branching limit") {
  ApdState a = support::plain_apd();
  a.traps = {{1.0, 1e-6, 0.3}};
  AnnealResponse r;
  r.trap_creation_coeff = 5.0;
  AnnealStep step;
  step.power_watt = 3.0;
  const ApdState s = apply_anneal(a, r, step);
  CHECK(s.branching_ratio() == doctest::Approx(0.5));
  CHECK_NOTHROW(s.validate());
}

TEST_CASE("thermal anneal uses the temperature override") {
  const Preset p = load_preset("slik-3-pre");
  AnnealStep thermal;
  thermal.temperature_override_c = peak_temperature(p.anneal, 1.0);
  AnnealStep laser;
  laser.power_watt = 1.0;
  CHECK(apply_anneal(p.apd, p.anneal, thermal).n_tgc ==
        doctest::Approx(apply_anneal(p.apd, p.anneal, laser).n_tgc));
  // no damage from an oven
  thermal.temperature_override_c = 300;
  CHECK_FALSE(apply_anneal(p.apd, p.anneal, thermal).failed);
}

TEST_CASE("heal-rate calibration reproduces the requested factor") {
  AnnealResponse r;
  const auto plan = stepwise_plan(1.4);
  r.heal.rate_prefactor_per_s = calibrate_heal_rate(r, plan, 758.0);
  CHECK(1.0 / plan_dark_factor(r, plan) == doctest::Approx(758.0).epsilon(1e-9));
  CHECK(calibrate_heal_rate(r, {AnnealStep{}}, 1.0) == 0.0);
  CHECK_THROWS_AS(calibrate_heal_rate(r, plan, 0.5), Error);
}

TEST_CASE("stepwise plans") {
  const auto plan = stepwise_plan(1.4);
  REQUIRE(plan.size() == 7);
  CHECK(plan.front().power_watt == doctest::Approx(0.2));
  CHECK(plan.back().power_watt == 1.4);
  for (std::size_t i = 1; i < plan.size(); ++i)
    CHECK(plan[i].power_watt > plan[i - 1].power_watt);
  CHECK(stepwise_plan(0.05).size() == 1);
  CHECK_THROWS_AS(stepwise_plan(0.0), Error);
}

// ------------------------------------------------------------------ campaigns

TEST_CASE("campaign on a detector that is failed at the start") {
  Preset p = load_preset("slik-1-pre");
  p.apd.failed = true;
  const auto log = run_campaign(p.apd, p.anneal, p.plan, p.characterization, {}, 1);
  CHECK(log.stop_reason == "failed");
  CHECK(log.entries.empty());
  CHECK(log.initial.detector_failed);
}

TEST_CASE("first step above the damage threshold stops with reason failed") {
  const Preset p = load_preset("sap500s2-1-pre");
  std::vector<AnnealStep> plan(3);
  plan[0].power_watt = 2.0;
  plan[1].power_watt = 0.5;
  plan[2].power_watt = 0.5;
  const auto log = run_campaign(p.apd, p.anneal, plan, quick_config(p), {}, 2);
  CHECK(log.stop_reason == "failed");
  REQUIRE(log.entries.size() == 1);
  CHECK(log.entries[0].state.failed);
  CHECK_FALSE(log.lowest_entry().has_value());
}

TEST_CASE("a V_br rise near the damage threshold halts the campaign") {
  const Preset p = load_preset("slik-1-pre");
  std::vector<AnnealStep> plan(4);
  plan[0].power_watt = 2.0;
  plan[1].power_watt = 3.3;
  plan[2].power_watt = 3.4;
  plan[3].power_watt = 3.5;
  const auto log = run_campaign(p.apd, p.anneal, plan, quick_config(p), {}, 3);
  CHECK(log.stop_reason == "vbr rise");
  CHECK(log.entries.size() == 2);
  CHECK(log.entries.size() <= plan.size());
}

TEST_CASE("diminishing returns rule") {
  const Preset p = load_preset("slik-1-pre");
  std::vector<AnnealStep> plan(5);
  for (auto &s : plan)
    s.power_watt = 0.2; // heals almost nothing
  StopRules rules;
  rules.min_step_reduction = 0.2;
  const auto log = run_campaign(p.apd, p.anneal, plan, quick_config(p), rules, 4);
  CHECK(log.stop_reason == "diminishing returns");
  CHECK(log.entries.size() == 1);
}

TEST_CASE("plan errors name the step") {
  const Preset p = load_preset("slik-1-pre");
  std::vector<AnnealStep> plan(2);
  plan[0].power_watt = 0.5;
  plan[1].power_watt = -1.0;
  try {
    run_campaign(p.apd, p.anneal, plan, quick_config(p), {}, 5);
    FAIL("expected ConfigError");
  } catch (const ConfigError &e) {
    CHECK(e.path() == "plan[1].power_watt");
  }
  CHECK_THROWS_AS(run_campaign(p.apd, p.anneal, {}, quick_config(p), {}, 5), ConfigError);
}

TEST_CASE("SLiK-4 single 1 W shot reduces the dark rate about 23 times") {
  const Preset p = load_preset("slik-4-pre");
  REQUIRE(p.plan.size() == 1);
  CHECK(p.plan[0].power_watt == 1.0);
  const auto log = run_campaign(p.apd, p.anneal, p.plan, quick_config(p), {}, 6);
  CHECK(log.stop_reason == "completed");
  CHECK(log.entries.size() == 1);
  const auto row = log.summary();
  CHECK(row.reduction_factor == doctest::Approx(23).epsilon(0.10));
  CHECK(row.power_w == 1.0);
}

TEST_CASE("stepwise and single-shot anneals give comparable reductions") {
  for (const std::string name : {"slik-1-pre", "slik-4-pre", "slik-5-pre"}) {
    const Preset p = load_preset(name);
    const auto stepwise = run_campaign(p.apd, p.anneal, stepwise_plan(1.0), quick_config(p), {}, 7);
    AnnealStep shot;
    shot.power_watt = 1.0;
    const auto single = run_campaign(p.apd, p.anneal, {shot}, quick_config(p), {}, 7);
    const double a = stepwise.summary().reduction_factor, b = single.summary().reduction_factor;
    INFO(name << " stepwise " << a << " single " << b);
    CHECK(std::max(a, b) / std::min(a, b) <= 2.0);
    CHECK(stepwise.entries.size() <= stepwise_plan(1.0).size());
  }
}
