#include "geigerlab/config.hpp"
#include "geigerlab/error.hpp"
#include "geigerlab/util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

namespace geigerlab {

namespace {

class Reader {
public:
  Reader(const Json &j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object())
      throw ConfigError(path_, "expected an object");
  }

  std::string sub(const std::string &key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const Json *child(const std::string &key) {
    used_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end() || it->is_null())
      return nullptr;
    return &*it;
  }

  double number(const std::string &key, double fallback) {
    const Json *v = child(key);
    if (!v)
      return fallback;
    if (!v->is_number())
      throw ConfigError(sub(key), "expected a number");
    return v->get<double>();
  }

  double number(const std::string &key) {
    if (!j_.contains(key))
      throw ConfigError(sub(key), "required");
    return number(key, 0.0);
  }

  std::optional<double> optional_number(const std::string &key) {
    if (!child(key))
      return std::nullopt;
    return number(key, 0.0);
  }

  std::uint64_t unsigned_integer(const std::string &key, std::uint64_t fallback) {
    const Json *v = child(key);
    if (!v)
      return fallback;
    if (!v->is_number_unsigned())
      throw ConfigError(sub(key), "expected a non-negative integer");
    return v->get<std::uint64_t>();
  }

  bool boolean(const std::string &key, bool fallback) {
    const Json *v = child(key);
    if (!v)
      return fallback;
    if (!v->is_boolean())
      throw ConfigError(sub(key), "expected true or false");
    return v->get<bool>();
  }

  std::string string(const std::string &key, const std::string &fallback) {
    const Json *v = child(key);
    if (!v)
      return fallback;
    if (!v->is_string())
      throw ConfigError(sub(key), "expected a string");
    return v->get<std::string>();
  }

  void finish() const {
    for (const auto &[key, value] : j_.items())
      if (!used_.count(key))
        throw ConfigError(sub(key), "unknown key");
  }

private:
  const Json &j_;
  std::string path_;
  std::set<std::string> used_;
};

Json optional_to_json(const std::optional<double> &v) { return v ? Json(*v) : Json(nullptr); }

} // namespace

// ---------------------------------------------------------------- detector

QuenchCircuit circuit_from_json(const Json &j, const std::string &path) {
  Reader r(j, path);
  QuenchCircuit c;
  c.r1_ohm = r.number("r1_ohm", c.r1_ohm);
  c.r2_ohm = r.number("r2_ohm", c.r2_ohm);
  c.latch_current_amp = r.number("latch_current_amp", c.latch_current_amp);
  c.dead_time_s = r.number("dead_time_s", c.dead_time_s);
  c.recharge_time_s = r.number("recharge_time_s", c.recharge_time_s);
  r.finish();
  try {
    c.validate();
  } catch (const ConfigError &e) {
    throw ConfigError(path + e.path().substr(std::string("circuit").size()),
                      std::string(e.what()).substr(e.path().size() + 2));
  }
  return c;
}

Json to_json(const QuenchCircuit &c) {
  return {{"r1_ohm", c.r1_ohm},
          {"r2_ohm", c.r2_ohm},
          {"latch_current_amp", c.latch_current_amp},
          {"dead_time_s", c.dead_time_s},
          {"recharge_time_s", c.recharge_time_s}};
}

ApdState apd_from_json(const Json &j, const std::string &path) {
  Reader r(j, path);
  ApdState a;
  a.sample_id = r.string("sample_id", "");
  try {
    a.model_id = apd_model_from_string(r.string("model", "SLiK"));
  } catch (const ConfigError &e) {
    throw ConfigError(r.sub("model"), std::string(e.what()).substr(e.path().size() + 2));
  }
  if (const Json *v = r.child("vbr")) {
    Reader vr(*v, r.sub("vbr"));
    a.vbr.intercept_volt = vr.number("intercept_volt");
    a.vbr.slope_volt_per_kelvin = vr.number("slope_volt_per_kelvin");
    a.vbr.reference_temperature_c = vr.number("reference_temperature_c", 0.0);
    vr.finish();
  } else {
    throw ConfigError(r.sub("vbr"), "required");
  }
  if (const Json *d = r.child("dark")) {
    Reader dr(*d, r.sub("dark"));
    a.dark.activation_energy_ev = dr.number("activation_energy_ev", a.dark.activation_energy_ev);
    a.dark.reference_temperature_c = dr.number("reference_temperature_c", a.dark.reference_temperature_c);
    a.dark.reference_excess_volt = dr.number("reference_excess_volt", a.dark.reference_excess_volt);
    a.dark.excess_exponent = dr.number("excess_exponent", a.dark.excess_exponent);
    dr.finish();
  }
  a.n_tgc = r.number("n_tgc");
  if (const Json *t = r.child("traps")) {
    if (!t->is_array())
      throw ConfigError(r.sub("traps"), "expected an array");
    for (std::size_t i = 0; i < t->size(); ++i) {
      Reader tr((*t)[i], r.sub("traps") + "[" + std::to_string(i) + "]");
      TrapSpecies s;
      s.density = tr.number("density", s.density);
      s.release_tau_s = tr.number("release_tau_s");
      s.fill_prob = tr.number("fill_prob");
      tr.finish();
      a.traps.push_back(s);
    }
  }
  a.pde_base = r.number("pde_base", a.pde_base);
  a.pde_reference_excess_volt = r.number("pde_reference_excess_volt", a.pde_reference_excess_volt);
  a.pde_saturation_volt = r.number("pde_saturation_volt", a.pde_saturation_volt);
  a.jitter_sigma_s = r.number("jitter_sigma_s", a.jitter_sigma_s);
  a.active_area_diameter_m = r.number("active_area_diameter_m", a.active_area_diameter_m);
  a.failed = r.boolean("failed", false);
  r.finish();
  try {
    a.validate();
  } catch (const ConfigError &e) {
    // validate() names fields relative to "apd"
    std::string p = e.path();
    if (p.rfind("apd", 0) == 0)
      p = path + p.substr(3);
    throw ConfigError(p, std::string(e.what()).substr(e.path().size() + 2));
  }
  return a;
}

Json to_json(const ApdState &a) {
  Json traps = Json::array();
  for (const auto &t : a.traps)
    traps.push_back({{"density", t.density}, {"release_tau_s", t.release_tau_s}, {"fill_prob", t.fill_prob}});
  return {{"sample_id", a.sample_id},
          {"model", std::string(to_string(a.model_id))},
          {"vbr",
           {{"intercept_volt", a.vbr.intercept_volt},
            {"slope_volt_per_kelvin", a.vbr.slope_volt_per_kelvin},
            {"reference_temperature_c", a.vbr.reference_temperature_c}}},
          {"dark",
           {{"activation_energy_ev", a.dark.activation_energy_ev},
            {"reference_temperature_c", a.dark.reference_temperature_c},
            {"reference_excess_volt", a.dark.reference_excess_volt},
            {"excess_exponent", a.dark.excess_exponent}}},
          {"n_tgc", a.n_tgc},
          {"traps", traps},
          {"pde_base", a.pde_base},
          {"pde_reference_excess_volt", a.pde_reference_excess_volt},
          {"pde_saturation_volt", a.pde_saturation_volt},
          {"jitter_sigma_s", a.jitter_sigma_s},
          {"active_area_diameter_m", a.active_area_diameter_m},
          {"failed", a.failed}};
}

// ---------------------------------------------------------------- scenario

Illumination illumination_from_json(const Json &j, const std::string &path) {
  Reader r(j, path);
  const std::string kind = r.string("kind", "none");
  Illumination out;
  if (kind == "none") {
    out = NoLight{};
  } else if (kind == "cw") {
    CwLight l;
    l.photon_rate_hz = r.number("photon_rate_hz", l.photon_rate_hz);
    out = l;
  } else if (kind == "pulsed") {
    PulsedLight l;
    l.rep_rate_hz = r.number("rep_rate_hz", l.rep_rate_hz);
    l.pulse_fwhm_s = r.number("pulse_fwhm_s", l.pulse_fwhm_s);
    l.mean_photons_per_pulse = r.number("mean_photons_per_pulse", l.mean_photons_per_pulse);
    out = l;
  } else if (kind == "spot") {
    SpotLight l;
    l.x_m = r.number("x_m", l.x_m);
    l.y_m = r.number("y_m", l.y_m);
    l.photon_rate_hz = r.number("photon_rate_hz", l.photon_rate_hz);
    l.beam_fwhm_m = r.number("beam_fwhm_m", l.beam_fwhm_m);
    out = l;
  } else {
    throw ConfigError(r.sub("kind"), "expected none, cw, pulsed or spot");
  }
  r.finish();
  return out;
}

Json to_json(const Illumination &light) {
  if (const auto *l = std::get_if<CwLight>(&light))
    return {{"kind", "cw"}, {"photon_rate_hz", l->photon_rate_hz}};
  if (const auto *l = std::get_if<PulsedLight>(&light))
    return {{"kind", "pulsed"},
            {"rep_rate_hz", l->rep_rate_hz},
            {"pulse_fwhm_s", l->pulse_fwhm_s},
            {"mean_photons_per_pulse", l->mean_photons_per_pulse}};
  if (const auto *l = std::get_if<SpotLight>(&light))
    return {{"kind", "spot"},
            {"x_m", l->x_m},
            {"y_m", l->y_m},
            {"photon_rate_hz", l->photon_rate_hz},
            {"beam_fwhm_m", l->beam_fwhm_m}};
  return {{"kind", "none"}};
}

Scenario scenario_from_json(const Json &j, const std::string &path) {
  Reader r(j, path);
  Scenario s;
  s.duration_s = r.number("duration_s", s.duration_s);
  if (const Json *l = r.child("illumination"))
    s.illumination = illumination_from_json(*l, r.sub("illumination"));
  s.rng_seed = r.unsigned_integer("rng_seed", s.rng_seed);
  s.quantum_ps = r.number("quantum_ps", s.quantum_ps);
  r.finish();
  s.validate();
  return s;
}

Json to_json(const Scenario &s) {
  return {{"duration_s", s.duration_s}, {"illumination", to_json(s.illumination)}, {"rng_seed", s.rng_seed},
          {"quantum_ps", s.quantum_ps}};
}

HistogramSpec histogram_from_json(const Json &j, const std::string &path) {
  Reader r(j, path);
  HistogramSpec h;
  h.t_min_s = r.number("t_min_s", h.t_min_s);
  h.t_max_s = r.number("t_max_s", h.t_max_s);
  const double bins = r.number("bins_per_decade", h.bins_per_decade);
  if (bins != std::floor(bins) || bins < 1 || bins > 10000)
    throw ConfigError(r.sub("bins_per_decade"), "must be an integer in [1, 10000]");
  h.bins_per_decade = static_cast<int>(bins);
  r.finish();
  try {
    h.validate();
  } catch (const ConfigError &e) {
    throw ConfigError(path + e.path().substr(std::string("histogram").size()),
                      std::string(e.what()).substr(e.path().size() + 2));
  }
  return h;
}

Json to_json(const HistogramSpec &h) {
  return {{"t_min_s", h.t_min_s}, {"t_max_s", h.t_max_s}, {"bins_per_decade", h.bins_per_decade}};
}

CharConfig char_config_from_json(const Json &j, const std::string &path) {
  Reader r(j, path);
  CharConfig c;
  c.temperature_c = r.number("temperature_c", c.temperature_c);
  c.v_excess_volt = r.number("v_excess_volt", c.v_excess_volt);
  if (const Json *v = r.child("circuit"))
    c.circuit = circuit_from_json(*v, r.sub("circuit"));
  c.dark_duration_s = r.number("dark_duration_s", c.dark_duration_s);
  c.min_dark_counts = r.number("min_dark_counts", c.min_dark_counts);
  c.max_dark_duration_s = r.number("max_dark_duration_s", c.max_dark_duration_s);
  c.measure_vbr = r.boolean("measure_vbr", c.measure_vbr);
  c.vbr_search_halfwidth_volt = r.number("vbr_search_halfwidth_volt", c.vbr_search_halfwidth_volt);
  c.vbr_tolerance_volt = r.number("vbr_tolerance_volt", c.vbr_tolerance_volt);
  c.vbr_probe_dwell_s = r.number("vbr_probe_dwell_s", c.vbr_probe_dwell_s);
  c.vbr_probe_photon_rate_hz = r.number("vbr_probe_photon_rate_hz", c.vbr_probe_photon_rate_hz);
  c.afterpulsing = r.boolean("afterpulsing", c.afterpulsing);
  if (const Json *h = r.child("histogram"))
    c.histogram = histogram_from_json(*h, r.sub("histogram"));
  c.measure_pde = r.boolean("measure_pde", c.measure_pde);
  c.pde_duration_s = r.number("pde_duration_s", c.pde_duration_s);
  c.photon_rate_hz = r.number("photon_rate_hz", c.photon_rate_hz);
  c.laser_power_before = r.number("laser_power_before", c.laser_power_before);
  c.laser_power_after = r.number("laser_power_after", c.laser_power_after);
  c.measure_jitter = r.boolean("measure_jitter", c.measure_jitter);
  c.jitter_duration_s = r.number("jitter_duration_s", c.jitter_duration_s);
  c.jitter_quantum_ps = r.number("jitter_quantum_ps", c.jitter_quantum_ps);
  if (const Json *p = r.child("pulsed")) {
    const Illumination l = illumination_from_json(*p, r.sub("pulsed"));
    if (!std::holds_alternative<PulsedLight>(l))
      throw ConfigError(r.sub("pulsed.kind"), "must be pulsed");
    c.pulsed = std::get<PulsedLight>(l);
  }
  r.finish();
  auto positive = [&](double v, const char *key) {
    if (!(v > 0))
      throw ConfigError(r.sub(key), "must be > 0");
  };
  positive(c.v_excess_volt, "v_excess_volt");
  positive(c.dark_duration_s, "dark_duration_s");
  positive(c.pde_duration_s, "pde_duration_s");
  positive(c.photon_rate_hz, "photon_rate_hz");
  positive(c.jitter_duration_s, "jitter_duration_s");
  positive(c.jitter_quantum_ps, "jitter_quantum_ps");
  positive(c.vbr_tolerance_volt, "vbr_tolerance_volt");
  positive(c.vbr_probe_dwell_s, "vbr_probe_dwell_s");
  positive(c.laser_power_before + c.laser_power_after, "laser_power_before");
  return c;
}

Json to_json(const CharConfig &c) {
  return {{"temperature_c", c.temperature_c},
          {"v_excess_volt", c.v_excess_volt},
          {"circuit", to_json(c.circuit)},
          {"dark_duration_s", c.dark_duration_s},
          {"min_dark_counts", c.min_dark_counts},
          {"max_dark_duration_s", c.max_dark_duration_s},
          {"measure_vbr", c.measure_vbr},
          {"vbr_search_halfwidth_volt", c.vbr_search_halfwidth_volt},
          {"vbr_tolerance_volt", c.vbr_tolerance_volt},
          {"vbr_probe_dwell_s", c.vbr_probe_dwell_s},
          {"vbr_probe_photon_rate_hz", c.vbr_probe_photon_rate_hz},
          {"afterpulsing", c.afterpulsing},
          {"histogram", to_json(c.histogram)},
          {"measure_pde", c.measure_pde},
          {"pde_duration_s", c.pde_duration_s},
          {"photon_rate_hz", c.photon_rate_hz},
          {"laser_power_before", c.laser_power_before},
          {"laser_power_after", c.laser_power_after},
          {"measure_jitter", c.measure_jitter},
          {"jitter_duration_s", c.jitter_duration_s},
          {"jitter_quantum_ps", c.jitter_quantum_ps},
          {"pulsed", to_json(Illumination{c.pulsed})}};
}

// ---------------------------------------------------------------- anneal

AnnealResponse anneal_from_json(const Json &j, const std::string &path) {
  Reader r(j, path);
  AnnealResponse a;
  if (const Json *t = r.child("temperature")) {
    Reader tr(*t, r.sub("temperature"));
    a.temperature.ambient_c = tr.number("ambient_c", a.temperature.ambient_c);
    a.temperature.coefficient_c_per_watt = tr.number("coefficient_c_per_watt", a.temperature.coefficient_c_per_watt);
    a.temperature.saturation_watt = tr.number("saturation_watt", a.temperature.saturation_watt);
    tr.finish();
  }
  if (const Json *h = r.child("heal")) {
    Reader hr(*h, r.sub("heal"));
    a.heal.rate_prefactor_per_s = hr.number("rate_prefactor_per_s", a.heal.rate_prefactor_per_s);
    a.heal.activation_energy_ev = hr.number("activation_energy_ev", a.heal.activation_energy_ev);
    hr.finish();
  }
  a.trap_creation_coeff = r.number("trap_creation_coeff", a.trap_creation_coeff);
  a.max_branching = r.number("max_branching", a.max_branching);
  a.damage_threshold_watt = r.optional_number("damage_threshold_watt");
  a.vbr_rise_near_damage_volt = r.number("vbr_rise_near_damage_volt", a.vbr_rise_near_damage_volt);
  a.near_damage_fraction = r.number("near_damage_fraction", a.near_damage_fraction);
  r.finish();
  try {
    a.validate();
  } catch (const ConfigError &e) {
    throw ConfigError(path + e.path().substr(std::string("anneal").size()),
                      std::string(e.what()).substr(e.path().size() + 2));
  }
  return a;
}

Json to_json(const AnnealResponse &a) {
  return {{"temperature",
           {{"ambient_c", a.temperature.ambient_c},
            {"coefficient_c_per_watt", a.temperature.coefficient_c_per_watt},
            {"saturation_watt", a.temperature.saturation_watt}}},
          {"heal",
           {{"rate_prefactor_per_s", a.heal.rate_prefactor_per_s},
            {"activation_energy_ev", a.heal.activation_energy_ev}}},
          {"trap_creation_coeff", a.trap_creation_coeff},
          {"max_branching", a.max_branching},
          {"damage_threshold_watt", optional_to_json(a.damage_threshold_watt)},
          {"vbr_rise_near_damage_volt", a.vbr_rise_near_damage_volt},
          {"near_damage_fraction", a.near_damage_fraction}};
}

AnnealStep step_from_json(const Json &j, const std::string &path) {
  AnnealStep s;
  if (j.is_number()) {
    s.power_watt = j.get<double>();
  } else {
    Reader r(j, path);
    s.power_watt = r.number("power_watt");
    s.exposure_s = r.number("exposure_s", s.exposure_s);
    s.cooldown_s = r.number("cooldown_s", s.cooldown_s);
    s.followed_by_characterization = r.boolean("followed_by_characterization", true);
    s.temperature_override_c = r.optional_number("temperature_override_c");
    r.finish();
  }
  try {
    s.validate();
  } catch (const ConfigError &e) {
    throw ConfigError(path + e.path().substr(std::string("step").size()),
                      std::string(e.what()).substr(e.path().size() + 2));
  }
  return s;
}

Json to_json(const AnnealStep &s) {
  return {{"power_watt", s.power_watt},
          {"exposure_s", s.exposure_s},
          {"cooldown_s", s.cooldown_s},
          {"followed_by_characterization", s.followed_by_characterization},
          {"temperature_override_c", optional_to_json(s.temperature_override_c)}};
}

std::vector<AnnealStep> plan_from_json(const Json &j, const std::string &path) {
  if (!j.is_array())
    throw ConfigError(path, "expected an array of steps");
  std::vector<AnnealStep> plan;
  for (std::size_t i = 0; i < j.size(); ++i)
    plan.push_back(step_from_json(j[i], path + "[" + std::to_string(i) + "]"));
  return plan;
}

StopRules stop_rules_from_json(const Json &j, const std::string &path) {
  Reader r(j, path);
  StopRules s;
  s.halt_on_failure = r.boolean("halt_on_failure", s.halt_on_failure);
  s.max_vbr_rise_volt = r.number("max_vbr_rise_volt", s.max_vbr_rise_volt);
  s.min_step_reduction = r.number("min_step_reduction", s.min_step_reduction);
  r.finish();
  return s;
}

Json to_json(const StopRules &s) {
  return {{"halt_on_failure", s.halt_on_failure},
          {"max_vbr_rise_volt", s.max_vbr_rise_volt},
          {"min_step_reduction", s.min_step_reduction}};
}

// ---------------------------------------------------------------- presets

Preset preset_from_json(const Json &j) {
  Reader r(j, "");
  Preset p;
  p.name = r.string("name", "");
  const Json *apd = r.child("apd");
  if (!apd)
    throw ConfigError("apd", "required");
  p.apd = apd_from_json(*apd, "apd");
  if (const Json *c = r.child("circuit"))
    p.circuit = circuit_from_json(*c, "circuit");
  if (const Json *a = r.child("anneal"))
    p.anneal = anneal_from_json(*a, "anneal");
  if (const Json *pl = r.child("plan"))
    p.plan = plan_from_json(*pl, "plan");
  if (const Json *c = r.child("characterization"))
    p.characterization = char_config_from_json(*c, "characterization");
  p.characterization.circuit = p.circuit;
  if (const Json *ref = r.child("reference")) {
    Reader rr(*ref, "reference");
    p.reference.sample = rr.string("sample", p.apd.sample_id);
    p.reference.before_hz = rr.number("before_hz", 0.0);
    p.reference.lowest_after_hz = rr.number("lowest_after_hz", 0.0);
    p.reference.reduction_factor = rr.number("reduction_factor", 0.0);
    p.reference.power_w = rr.number("power_w", 0.0);
    p.reference.v_excess_volt = rr.number("v_excess_volt", 0.0);
    rr.finish();
  }
  r.finish();
  return p;
}

Json to_json(const Preset &p) {
  Json plan = Json::array();
  for (const auto &s : p.plan)
    plan.push_back(to_json(s));
  Json characterization = to_json(p.characterization);
  characterization.erase("circuit"); // the preset-level circuit applies
  return {{"name", p.name},
          {"apd", to_json(p.apd)},
          {"circuit", to_json(p.circuit)},
          {"anneal", to_json(p.anneal)},
          {"plan", plan},
          {"characterization", characterization},
          {"reference", to_json(p.reference)}};
}

std::string preset_dir() {
  if (const char *env = std::getenv("GEIGERLAB_PRESET_DIR"); env && *env)
    return env;
  return std::string(GEIGERLAB_DATA_DIR) + "/presets";
}

std::vector<std::string> preset_names() {
  namespace fs = std::filesystem;
  std::vector<std::string> names;
  std::error_code ec;
  for (const auto &entry : fs::directory_iterator(preset_dir(), ec))
    if (entry.path().extension() == ".json")
      names.push_back(entry.path().stem().string());
  std::sort(names.begin(), names.end());
  return names;
}

Json load_preset_json(const std::string &name) {
  const std::string path = preset_dir() + "/" + name + ".json";
  if (!std::filesystem::exists(path))
    throw ConfigError("preset", "unknown preset '" + name + "' (looked in " + preset_dir() + ")");
  return read_json_file(path);
}

Preset load_preset(const std::string &name) {
  try {
    return preset_from_json(load_preset_json(name));
  } catch (const ConfigError &e) {
    if (e.path() == "preset")
      throw;
    throw ConfigError("preset " + name + ": " + e.path(),
                      std::string(e.what()).substr(e.path().size() + 2));
  }
}

// ---------------------------------------------------------------- reports

Json to_json(const AfterpulseAnalysis &a) {
  return {{"dead_time_s", a.dead_time_s},
          {"recharge_time_s", a.recharge_time_s},
          {"background_rate_hz", a.background_rate_hz},
          {"afterpulse_probability", a.afterpulse_probability},
          {"trap_taus_s", a.trap_taus_s}};
}

Json to_json(const CharReport &r) {
  Json j = {{"sample_id", r.sample_id},
            {"temperature_c", r.temperature_c},
            {"v_excess_volt", r.v_excess_volt},
            {"vbr_volt", r.vbr_volt},
            {"vbr_uncertainty_volt", r.vbr_uncertainty_volt},
            {"dark_rate_hz", r.dark_rate_hz},
            {"dark_counts", r.dark_counts},
            {"dark_duration_s", r.dark_duration_s},
            {"rel_pde", r.rel_pde},
            {"rel_pde_flagged", r.rel_pde_flagged},
            {"abs_pde", optional_to_json(r.abs_pde)},
            {"normalized_photon_rate", r.normalized_photon_rate},
            {"jitter_fwhm_s", optional_to_json(r.jitter_fwhm_s)},
            {"afterpulse_status", r.afterpulse_status},
            {"afterpulse", r.afterpulse ? to_json(*r.afterpulse) : Json(nullptr)},
            {"detector_failed", r.detector_failed}};
  j["metadata"] = Json::object();
  for (const auto &[k, v] : r.metadata)
    j["metadata"][k] = v;
  return j;
}

Json to_json(const Table1Row &row) {
  return {{"sample", row.sample},
          {"before_hz", row.before_hz},
          {"lowest_after_hz", row.lowest_after_hz},
          {"reduction_factor", row.reduction_factor},
          {"power_w", row.power_w},
          {"v_excess_volt", row.v_excess_volt}};
}

Json to_json(const CampaignLog &log) {
  Json entries = Json::array();
  for (const auto &e : log.entries)
    entries.push_back({{"step", to_json(e.step)},
                       {"peak_temperature_c", e.peak_temperature_c},
                       {"state", to_json(e.state)},
                       {"report", e.report ? to_json(*e.report) : Json(nullptr)}});
  return {{"sample_id", log.sample_id},
          {"seed", log.seed},
          {"initial_state", to_json(log.initial_state)},
          {"initial", to_json(log.initial)},
          {"entries", entries},
          {"stop_reason", log.stop_reason},
          {"summary", to_json(log.summary())}};
}

Json provenance(const Json &config, std::uint64_t seed) {
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(fnv1a64(config.dump())));
  return {{"tool", "geigerlab"}, {"version", GEIGERLAB_VERSION}, {"config_hash", hash}, {"seed", seed}};
}

std::string dump_json(const Json &j) { return j.dump(2) + "\n"; }

void write_histogram_csv(const ExpBinHistogram &h, std::ostream &out) {
  out << "edge_lo,edge_hi,count,rate\n";
  for (std::size_t i = 0; i < h.bins(); ++i)
    out << format_double(h.lo(i)) << ',' << format_double(h.hi(i)) << ',' << h.counts[i] << ','
        << format_double(h.rate(i)) << '\n';
}

void write_table1_csv(const std::vector<Table1Row> &rows, std::ostream &out) {
  out << "sample,before_hz,lowest_after_hz,reduction_factor,power_w,v_excess\n";
  for (const auto &r : rows)
    out << r.sample << ',' << format_double(r.before_hz) << ',' << format_double(r.lowest_after_hz)
        << ',' << format_double(r.reduction_factor) << ',' << format_double(r.power_w) << ','
        << format_double(r.v_excess_volt) << '\n';
}

void write_scan_csv(const EfficiencyMap &map, std::ostream &out) {
  out << "x_m,y_m,pde,pde_raw,sigma\n";
  for (std::size_t iy = 0; iy < map.n; ++iy)
    for (std::size_t ix = 0; ix < map.n; ++ix) {
      const std::size_t k = iy * map.n + ix;
      out << format_double(map.coords_m[ix]) << ',' << format_double(map.coords_m[iy]) << ','
          << format_double(map.pde[k]) << ',' << format_double(map.pde_raw[k]) << ','
          << format_double(map.sigma[k]) << '\n';
    }
}

Json read_json_file(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError(path, "cannot open file");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error &e) {
    throw ConfigError(path, std::string("invalid JSON: ") + e.what());
  }
}

void write_file_atomic(const std::string &path, const std::string &content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path())
    fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw Error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out)
      throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

} // namespace geigerlab
