#pragma once

// Offline fixture generation: builds the bundled detector presets and fits
// each sample's healing prefactor to its published dark-rate reduction.

#include "geigerlab/config.hpp"

#include <vector>

namespace geigerlab::calibration {

struct SampleTarget {
  const char *preset;
  const char *sample;
  ApdModel model;
  double before_hz;
  double lowest_after_hz;
  double reduction_factor;
  double power_w;
  double v_excess_volt;
  std::vector<double> plan_watts;
};

const std::vector<SampleTarget> &published_samples();

/// Model-family defaults with n_tgc, plan and heal rate fitted to `t`.
Preset calibrate(const SampleTarget &t);
std::vector<Preset> calibrate_all();

/// Damage threshold of a sample, if the family or sample has one.
std::optional<double> damage_threshold(const SampleTarget &t);

} // namespace geigerlab::calibration
