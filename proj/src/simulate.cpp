#include "geigerlab/simulate.hpp"

#include "geigerlab/error.hpp"
#include "geigerlab/util.hpp"

#include <cmath>
#include <queue>
#include <random>
#include <vector>

namespace geigerlab {

namespace {

enum class Source : std::uint8_t { Dark, Photon, Trap };

struct Candidate {
  double time;        // nominal arrival (pulse centre for pulsed light)
  Source source;
  bool operator>(const Candidate &o) const { return time > o.time; }
};

using CandidateQueue =
    std::priority_queue<Candidate, std::vector<Candidate>, std::greater<Candidate>>;

class PhotonSource {
public:
  PhotonSource(const Illumination &light, double pde, double diameter_m)
      : light_(light), pde_(pde), radius2_(0.25 * diameter_m * diameter_m) {
    if (const auto *cw = std::get_if<CwLight>(&light_)) {
      rate_ = cw->photon_rate_hz * pde_;
    } else if (const auto *spot = std::get_if<SpotLight>(&light_)) {
      rate_ = spot->photon_rate_hz * pde_;
      beam_sigma_ = spot->beam_fwhm_m / kFwhmPerSigma;
    } else if (const auto *pulsed = std::get_if<PulsedLight>(&light_)) {
      mean_detected_ = pulsed->mean_photons_per_pulse * pde_;
      pulse_prob_ = -std::expm1(-mean_detected_);
      pulse_sigma_ = pulsed->pulse_fwhm_s / kFwhmPerSigma;
    }
  }

  bool active() const { return rate_ > 0 || pulse_prob_ > 0; }
  bool pulsed() const { return pulse_prob_ > 0; }

  /// Nominal time of the next candidate after the current one.
  double next(std::mt19937_64 &rng) {
    if (pulsed()) {
      const auto &p = std::get<PulsedLight>(light_);
      if (started_)
        pulse_ += 1;
      started_ = true;
      if (pulse_prob_ < 1.0)
        pulse_ += std::geometric_distribution<std::uint64_t>(pulse_prob_)(rng);
      return static_cast<double>(pulse_) / p.rep_rate_hz;
    }
    t_ += std::exponential_distribution<double>(rate_)(rng);
    return t_;
  }

  /// Extra timing offset of the photon relative to its nominal time.
  double offset(std::mt19937_64 &rng) const {
    if (pulse_sigma_ > 0)
      return std::normal_distribution<double>(0.0, pulse_sigma_)(rng);
    return 0.0;
  }

  /// Acceptance of a live candidate given the recharge ramp in [0, 1].
  bool accept(double ramp, std::mt19937_64 &rng) const {
    std::uniform_real_distribution<double> u01;
    if (const auto *spot = std::get_if<SpotLight>(&light_)) {
      std::normal_distribution<double> n01;
      const double x = spot->x_m + beam_sigma_ * n01(rng);
      const double y = spot->y_m + beam_sigma_ * n01(rng);
      if (x * x + y * y > radius2_)
        return false;
    }
    if (ramp >= 1.0)
      return true;
    if (pulsed())
      return u01(rng) * pulse_prob_ < -std::expm1(-mean_detected_ * ramp);
    return u01(rng) < ramp;
  }

private:
  Illumination light_;
  double pde_;
  double radius2_;
  double rate_ = 0;
  double beam_sigma_ = 0;
  double mean_detected_ = 0;
  double pulse_prob_ = 0;
  double pulse_sigma_ = 0;
  double t_ = 0;
  std::uint64_t pulse_ = 0;
  bool started_ = false;
};

void put_metadata(TagStream &s, const ApdState &apd, const OperatingPoint &op,
                  const Scenario &scenario, double v_excess) {
  auto &m = s.header.metadata;
  m["generator"] = "geigerlab.simulate";
  m["sample_id"] = apd.sample_id;
  m["model"] = std::string(to_string(apd.model_id));
  m["temperature_c"] = format_double(op.temperature_c);
  m["v_bias_volt"] = format_double(op.v_bias_volt);
  m["v_excess_volt"] = format_double(v_excess);
  m["rng_seed"] = std::to_string(scenario.rng_seed);
}

} // namespace

std::uint64_t pulse_tick(const PulsedLight &light, std::uint64_t k, double quantum_s) {
  const double t = static_cast<double>(k) / light.rep_rate_hz;
  return static_cast<std::uint64_t>(std::floor(t / quantum_s));
}

TagStream simulate(const ApdState &apd, const OperatingPoint &op, const Scenario &scenario,
                   const QuenchCircuit &circuit, SimStats *stats) {
  apd.validate();
  circuit.validate();
  scenario.validate();

  TagStream out;
  out.header.duration_s = scenario.duration_s;
  out.header.quantum_ps = scenario.quantum_ps;
  const double v_excess = excess_voltage(apd, op);
  put_metadata(out, apd, op, scenario, v_excess);

  SimStats local;
  SimStats &st = stats ? *stats : local;
  st = {};

  if (apd.failed) {
    out.header.metadata["detector_failed"] = "true";
    out.header.metadata["recorded_events"] = "0";
    return out;
  }
  if (!(v_excess > 0))
    throw ConfigError("op_point.v_bias_volt", "operating point is below breakdown");
  if (!can_quench(circuit, v_excess))
    throw ConfigError("op_point.v_bias_volt",
                      "steady-state current exceeds latch current, avalanche cannot quench");
  if (scenario.duration_s <= 0) {
    out.header.metadata["recorded_events"] = "0";
    return out;
  }

  const double q = out.quantum_s();
  const double duration = scenario.duration_s;
  const std::uint64_t max_tick = out.header.max_tick();
  const std::uint64_t dead_ticks = ticks_at_least(circuit.dead_time_s, q);
  const double dead_s = circuit.dead_time_s;
  const double recharge_s = circuit.recharge_time_s;
  const double jitter = apd.jitter_sigma_s;

  std::mt19937_64 rng(scenario.rng_seed);
  std::uniform_real_distribution<double> u01;
  std::normal_distribution<double> n01;

  const double dark_rate = dark_rate_model(apd, op);
  PhotonSource photons(scenario.illumination, detection_efficiency(apd, v_excess),
                       apd.active_area_diameter_m);

  std::vector<double> capture;
  std::vector<double> tau;
  for (const auto &t : apd.traps) {
    capture.push_back(t.capture_probability());
    tau.push_back(t.release_tau_s);
  }

  CandidateQueue queue;
  double dark_t = 0;
  if (dark_rate > 0) {
    dark_t = std::exponential_distribution<double>(dark_rate)(rng);
    queue.push({dark_t, Source::Dark});
  }
  if (photons.active())
    queue.push({photons.next(rng), Source::Photon});

  bool have_last = false;
  std::uint64_t last_tick = 0;
  double last_time = 0;

  while (!queue.empty()) {
    const Candidate c = queue.top();
    if (c.time >= duration)
      break;
    queue.pop();

    double detect = c.time;
    if (c.source == Source::Dark) {
      dark_t += std::exponential_distribution<double>(dark_rate)(rng);
      queue.push({dark_t, Source::Dark});
    } else if (c.source == Source::Photon) {
      detect += photons.offset(rng);
      queue.push({photons.next(rng), Source::Photon});
    }
    if (jitter > 0)
      detect += jitter * n01(rng);
    if (detect < 0)
      continue;
    const double tick_f = std::floor(detect / q);
    if (tick_f > static_cast<double>(max_tick))
      continue;
    const auto tick = static_cast<std::uint64_t>(tick_f);

    double ramp = 1.0;
    if (have_last) {
      if (tick < last_tick || tick - last_tick < dead_ticks) {
        ++st.lost_dead;
        continue;
      }
      if (recharge_s > 0)
        ramp = std::clamp((detect - last_time - dead_s) / recharge_s, 0.0, 1.0);
    }

    bool accepted;
    if (c.source == Source::Photon)
      accepted = photons.accept(ramp, rng);
    else
      accepted = ramp >= 1.0 || u01(rng) < ramp;
    if (!accepted) {
      if (ramp < 1.0)
        ++st.lost_recharge;
      continue;
    }

    out.events.push_back({0, tick});
    have_last = true;
    last_tick = tick;
    last_time = detect;
    ++st.recorded;
    switch (c.source) {
    case Source::Dark:
      ++st.recorded_dark;
      break;
    case Source::Photon:
      ++st.recorded_photon;
      break;
    case Source::Trap:
      ++st.recorded_afterpulse;
      break;
    }

    for (std::size_t i = 0; i < capture.size(); ++i) {
      if (capture[i] > 0 && u01(rng) < capture[i]) {
        ++st.traps_filled;
        queue.push({detect + std::exponential_distribution<double>(1.0 / tau[i])(rng),
                    Source::Trap});
      }
    }
  }

  out.header.metadata["recorded_events"] = std::to_string(out.events.size());
  return out;
}

double afterpulse_yield(const ApdState &apd, const QuenchCircuit &circuit) {
  const double dead = circuit.dead_time_s, ramp = circuit.recharge_time_s;
  double yield = 0;
  for (const auto &t : apd.traps) {
    const double tau = t.release_tau_s;
    // P(release > dead + ramp) plus the ramp-weighted release probability inside the ramp
    double live = std::exp(-(dead + ramp) / tau);
    if (ramp > 0) {
      const double e = std::exp(-ramp / tau);
      live += std::exp(-dead / tau) * (tau * (1 - e) - ramp * e) / ramp;
    }
    yield += t.capture_probability() * live;
  }
  return yield;
}

double expected_recorded_rate(const ApdState &apd, const QuenchCircuit &circuit,
                              double primary_rate_hz) {
  const double window = circuit.dead_time_s + 0.5 * circuit.recharge_time_s;
  return primary_rate_hz / (1 - afterpulse_yield(apd, circuit) + primary_rate_hz * window);
}

double primary_rate_for_recorded(const ApdState &apd, const QuenchCircuit &circuit,
                                 double recorded_rate_hz) {
  const double window = circuit.dead_time_s + 0.5 * circuit.recharge_time_s;
  if (!(recorded_rate_hz * window < 1))
    throw Error("primary_rate_for_recorded: recorded rate beyond saturation");
  return recorded_rate_hz * (1 - afterpulse_yield(apd, circuit)) / (1 - recorded_rate_hz * window);
}

} // namespace geigerlab
