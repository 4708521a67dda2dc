#include "charlab_detail.hpp"
#include "geigerlab/anneal.hpp"
#include "geigerlab/error.hpp"

#include <cmath>

namespace geigerlab {

std::optional<std::size_t> CampaignLog::lowest_entry() const {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto &r = entries[i].report;
    if (!r || r->detector_failed)
      continue;
    if (!best || r->dark_rate_hz < entries[*best].report->dark_rate_hz)
      best = i;
  }
  return best;
}

Table1Row CampaignLog::summary() const {
  Table1Row row;
  row.sample = sample_id;
  row.before_hz = initial.dark_rate_hz;
  row.v_excess_volt = initial.v_excess_volt;
  if (const auto i = lowest_entry()) {
    row.lowest_after_hz = entries[*i].report->dark_rate_hz;
    row.power_w = entries[*i].step.power_watt;
    row.reduction_factor =
        row.lowest_after_hz > 0 ? row.before_hz / row.lowest_after_hz : INFINITY;
  } else {
    row.lowest_after_hz = row.before_hz;
    row.reduction_factor = 1.0;
  }
  return row;
}

CampaignLog run_campaign(const ApdState &apd, const AnnealResponse &resp,
                         const std::vector<AnnealStep> &plan, const CharConfig &config,
                         const StopRules &rules, std::uint64_t seed) {
  if (plan.empty())
    throw ConfigError("plan", "must contain at least one step");
  resp.validate();
  for (std::size_t i = 0; i < plan.size(); ++i) {
    try {
      plan[i].validate();
    } catch (const ConfigError &e) {
      throw ConfigError("plan[" + std::to_string(i) + "]." + e.path().substr(5),
                        std::string(e.what()).substr(e.path().size() + 2));
    }
  }

  CampaignLog log;
  log.sample_id = apd.sample_id;
  log.initial_state = apd;
  log.seed = seed;
  try {
    log.initial = characterize(apd, config, mix_seed(seed, 0));
  } catch (const Error &e) {
    throw Error("campaign step 0 (initial characterization): " + std::string(e.what()));
  }
  if (apd.failed) {
    log.stop_reason = "failed";
    return log;
  }

  ApdState state = apd;
  double previous_rate = log.initial.dark_rate_hz;
  const double initial_vbr = log.initial.vbr_volt;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const AnnealStep &step = plan[i];
    CampaignEntry entry;
    entry.step = step;
    entry.peak_temperature_c = step.temperature_override_c ? *step.temperature_override_c
                                                           : peak_temperature(resp, step.power_watt);
    state = apply_anneal(state, resp, step);
    entry.state = state;
    if (step.followed_by_characterization) {
      try {
        entry.report = characterize(state, config, mix_seed(seed, i + 1), &log.initial);
      } catch (const Error &e) {
        throw Error("campaign step " + std::to_string(i + 1) + ": " + e.what());
      }
    }
    log.entries.push_back(std::move(entry));
    const auto &report = log.entries.back().report;

    if (rules.halt_on_failure && state.failed) {
      log.stop_reason = "failed";
      break;
    }
    if (report && std::isfinite(rules.max_vbr_rise_volt) &&
        report->vbr_volt - initial_vbr > rules.max_vbr_rise_volt) {
      log.stop_reason = "vbr rise";
      break;
    }
    if (report && rules.min_step_reduction > 0 && previous_rate > 0) {
      const double drop = (previous_rate - report->dark_rate_hz) / previous_rate;
      if (drop < rules.min_step_reduction) {
        log.stop_reason = "diminishing returns";
        break;
      }
    }
    if (report)
      previous_rate = report->dark_rate_hz;
  }
  return log;
}

} // namespace geigerlab
