// geigerlab: simulate | characterize | campaign | thermal | scan

#include "geigerlab/anneal.hpp"
#include "geigerlab/charlab.hpp"
#include "geigerlab/config.hpp"
#include "geigerlab/error.hpp"
#include "geigerlab/simulate.hpp"
#include "geigerlab/thermal.hpp"
#include "geigerlab/timetag.hpp"
#include "geigerlab/util.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using namespace geigerlab;

namespace {

struct Flags {
  std::string config, out, preset;
  std::uint64_t seed = 0;
  double duration_s = 0, power_w = 0, dead_time_s = 0;
  int bins_per_decade = 0;
  std::vector<std::string> inputs;
};

struct Run {
  std::string command;
  Json cfg;
  fs::path base_dir;   // relative paths in the config resolve here
  std::uint64_t seed = 1;
  fs::path out;
  int errors = 0;

  void report_error(const std::string &path, const std::string &message) {
    ++errors;
    Json e = {{"error", {{"command", command}, {"path", path}, {"message", message}}}};
    std::cerr << e.dump() << '\n';
  }
  void report_error(const std::exception &e) {
    if (const auto *c = dynamic_cast<const ConfigError *>(&e))
      report_error(c->path(), std::string(c->what()).substr(c->path().size() + 2));
    else
      report_error("", e.what());
  }
  std::string resolve(const std::string &p) const {
    const fs::path path(p);
    return path.is_absolute() ? p : (base_dir / path).string();
  }
  void write(const std::string &name, const std::string &content) const {
    write_file_atomic((out / name).string(), content);
  }
};

void allow_keys(const Json &cfg, std::initializer_list<const char *> keys) {
  if (!cfg.is_object())
    throw ConfigError("config", "expected a JSON object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto &[k, v] : cfg.items())
    if (!allowed.count(k))
      throw ConfigError(k, "unknown key");
}

double number_or(const Json &cfg, const char *key, double fallback) {
  if (!cfg.contains(key) || cfg[key].is_null())
    return fallback;
  if (!cfg[key].is_number())
    throw ConfigError(key, "expected a number");
  return cfg[key].get<double>();
}

std::string string_or(const Json &cfg, const char *key, const std::string &fallback) {
  if (!cfg.contains(key) || cfg[key].is_null())
    return fallback;
  if (!cfg[key].is_string())
    throw ConfigError(key, "expected a string");
  return cfg[key].get<std::string>();
}

/// Preset (when named) with apd / circuit / anneal / characterization overrides merged in.
Preset resolve_detector(const Json &cfg, const std::string &preset_name) {
  Json base;
  if (!preset_name.empty()) {
    base = load_preset_json(preset_name);
  } else if (cfg.contains("apd")) {
    base = {{"name", "custom"}};
  } else {
    throw ConfigError("preset", "name a preset or give an apd block");
  }
  for (const char *key : {"apd", "circuit", "anneal", "characterization"}) {
    if (!cfg.contains(key))
      continue;
    if (!cfg[key].is_object())
      throw ConfigError(key, "expected an object");
    if (!base.contains(key))
      base[key] = Json::object();
    base[key].merge_patch(cfg[key]);
  }
  return preset_from_json(base);
}

std::string detector_name(const Preset &p) { return p.name.empty() ? p.apd.sample_id : p.name; }

// ---------------------------------------------------------------- commands

void cmd_simulate(Run &run) {
  const Json &cfg = run.cfg;
  allow_keys(cfg, {"preset", "apd", "circuit", "characterization", "temperature_c", "v_excess_volt",
                   "v_bias_volt", "scenario", "seed", "out", "name"});
  const Preset p = resolve_detector(cfg, string_or(cfg, "preset", ""));
  const double temperature = number_or(cfg, "temperature_c", p.characterization.temperature_c);
  OperatingPoint op = OperatingPoint::at_excess(
      p.apd, temperature, number_or(cfg, "v_excess_volt", p.characterization.v_excess_volt));
  if (cfg.contains("v_bias_volt"))
    op.v_bias_volt = number_or(cfg, "v_bias_volt", op.v_bias_volt);
  Scenario sc = cfg.contains("scenario") ? scenario_from_json(cfg["scenario"]) : Scenario{};
  sc.rng_seed = run.seed;

  SimStats stats;
  const TagStream stream = simulate(p.apd, op, sc, p.circuit, &stats);
  const std::string name = string_or(cfg, "name", detector_name(p));
  std::ostringstream bin;
  write_stream(stream, bin);
  run.write(name + ".gtag", bin.str());

  const double n = static_cast<double>(stream.size());
  Json summary = {{"provenance", provenance(cfg, run.seed)},
                  {"sample_id", p.apd.sample_id},
                  {"stream", name + ".gtag"},
                  {"events", stream.size()},
                  {"duration_s", sc.duration_s},
                  {"mean_rate_hz", sc.duration_s > 0 ? n / sc.duration_s : 0.0},
                  {"rate_sigma_hz", sc.duration_s > 0 ? std::sqrt(n) / sc.duration_s : 0.0},
                  {"temperature_c", op.temperature_c},
                  {"v_bias_volt", op.v_bias_volt},
                  {"v_excess_volt", excess_voltage(p.apd, op)},
                  {"modeled_dark_rate_hz", dark_rate_model(p.apd, op)},
                  {"stats",
                   {{"recorded_dark", stats.recorded_dark},
                    {"recorded_photon", stats.recorded_photon},
                    {"recorded_afterpulse", stats.recorded_afterpulse},
                    {"lost_dead", stats.lost_dead},
                    {"lost_recharge", stats.lost_recharge},
                    {"traps_filled", stats.traps_filled}}}};
  run.write(name + ".summary.json", dump_json(summary));
}

void write_report(Run &run, const std::string &stem, const CharReport &report,
                  const ExpBinHistogram &hist) {
  Json j = {{"provenance", provenance(run.cfg, run.seed)}, {"report", to_json(report)}};
  if (hist.n_triggers > 0) {
    std::ostringstream csv;
    write_histogram_csv(hist, csv);
    run.write(stem + ".histogram.csv", csv.str());
    j["histogram"] = stem + ".histogram.csv";
  }
  run.write(stem + ".report.json", dump_json(j));
}

void cmd_characterize(Run &run) {
  const Json &cfg = run.cfg;
  allow_keys(cfg, {"preset", "apd", "circuit", "characterization", "inputs", "histogram",
                   "dead_time_s", "seed", "out"});
  HistogramSpec spec;
  if (cfg.contains("histogram"))
    spec = histogram_from_json(cfg["histogram"]);
  const double dead = number_or(cfg, "dead_time_s", 0.0);
  if (!(dead >= 0))
    throw ConfigError("dead_time_s", "must be >= 0");

  std::vector<std::string> inputs;
  if (cfg.contains("inputs")) {
    if (!cfg["inputs"].is_array())
      throw ConfigError("inputs", "expected an array of paths");
    for (std::size_t i = 0; i < cfg["inputs"].size(); ++i) {
      if (!cfg["inputs"][i].is_string())
        throw ConfigError("inputs[" + std::to_string(i) + "]", "expected a path");
      inputs.push_back(cfg["inputs"][i].get<std::string>());
    }
  }

  if (inputs.empty()) {
    if (!cfg.contains("preset") && !cfg.contains("apd"))
      throw ConfigError("inputs", "missing inputs: give stream files, a preset or an apd block");
    const Preset p = resolve_detector(cfg, string_or(cfg, "preset", ""));
    CharConfig cc = p.characterization;
    if (cfg.contains("histogram"))
      cc.histogram = spec;
    ExpBinHistogram hist;
    const CharReport report = characterize(p.apd, cc, run.seed, nullptr, &hist);
    write_report(run, detector_name(p), report, hist);
    return;
  }

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const std::string path = run.resolve(inputs[i]);
    try {
      if (!fs::exists(path))
        throw ConfigError("inputs[" + std::to_string(i) + "]", "missing input " + path);
      TagStream stream = read_stream_file(path);
      if (dead > 0)
        stream = apply_dead_time(stream, dead);
      ExpBinHistogram hist;
      const CharReport report = characterize_stream(stream, spec, &hist);
      write_report(run, fs::path(path).stem().string(), report, hist);
    } catch (const std::exception &e) {
      run.report_error(e);
    }
  }
}

void cmd_campaign(Run &run) {
  const Json &cfg = run.cfg;
  allow_keys(cfg, {"preset", "presets", "apd", "circuit", "anneal", "characterization", "plan",
                   "stop_rules", "compare_single_shot_watt", "seed", "out"});
  std::vector<std::string> names;
  if (cfg.contains("presets")) {
    const Json &ps = cfg["presets"];
    if (ps.is_string() && ps.get<std::string>() == "all") {
      names = preset_names();
    } else if (ps.is_array()) {
      for (std::size_t i = 0; i < ps.size(); ++i) {
        if (!ps[i].is_string())
          throw ConfigError("presets[" + std::to_string(i) + "]", "expected a preset name");
        names.push_back(ps[i].get<std::string>());
      }
    } else {
      throw ConfigError("presets", "expected \"all\" or an array of names");
    }
  } else {
    names.push_back(string_or(cfg, "preset", ""));
  }
  if (names.empty())
    throw ConfigError("presets", "no presets found in " + preset_dir());

  const StopRules rules = cfg.contains("stop_rules") ? stop_rules_from_json(cfg["stop_rules"]) : StopRules{};
  const std::optional<double> single =
      cfg.contains("compare_single_shot_watt")
          ? std::optional<double>(number_or(cfg, "compare_single_shot_watt", 0.0))
          : std::nullopt;

  struct Outcome {
    std::optional<CampaignLog> log;
    std::optional<CampaignLog> stepwise_log;
    std::optional<CampaignLog> single_log;
    std::string error;
    std::string error_path;
  };
  std::vector<Outcome> outcomes(names.size());

#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < names.size(); ++i) {
    try {
      const Preset p = resolve_detector(cfg, names[i]);
      const auto plan = cfg.contains("plan") ? plan_from_json(cfg["plan"]) : p.plan;
      const std::uint64_t seed = fnv1a64(detector_name(p) + "#" + std::to_string(run.seed));
      outcomes[i].log = run_campaign(p.apd, p.anneal, plan, p.characterization, rules, seed);
      if (single) {
        // same final power reached stepwise and in one shot
        AnnealStep shot;
        shot.power_watt = *single;
        outcomes[i].stepwise_log = run_campaign(p.apd, p.anneal, stepwise_plan(*single),
                                                p.characterization, rules, seed);
        outcomes[i].single_log =
            run_campaign(p.apd, p.anneal, {shot}, p.characterization, rules, seed);
      }
    } catch (const ConfigError &e) {
      outcomes[i].error_path = e.path();
      outcomes[i].error = std::string(e.what()).substr(e.path().size() + 2);
    } catch (const std::exception &e) {
      outcomes[i].error = e.what();
    }
  }

  std::vector<Table1Row> rows;
  std::ostringstream comparison;
  comparison << "sample,final_power_w,stepwise_reduction_factor,single_shot_reduction_factor,ratio\n";
  for (std::size_t i = 0; i < names.size(); ++i) {
    const Outcome &o = outcomes[i];
    if (!o.log) {
      run.report_error(o.error_path, names[i] + ": " + o.error);
      continue;
    }
    const std::string stem = names[i].empty() ? o.log->sample_id : names[i];
    Json j = {{"provenance", provenance(cfg, run.seed)}, {"campaign", to_json(*o.log)}};
    if (o.single_log) {
      j["comparison_stepwise"] = to_json(*o.stepwise_log);
      j["comparison_single_shot"] = to_json(*o.single_log);
    }
    run.write("campaign_" + stem + ".json", dump_json(j));
    rows.push_back(o.log->summary());
    if (o.single_log) {
      const double a = o.stepwise_log->summary().reduction_factor;
      const double b = o.single_log->summary().reduction_factor;
      comparison << o.log->sample_id << ',' << format_double(*single) << ',' << format_double(a)
                 << ',' << format_double(b) << ',' << format_double(a / b) << '\n';
    }
  }
  std::ostringstream csv;
  write_table1_csv(rows, csv);
  run.write("table1.csv", csv.str());
  if (single)
    run.write("comparison.csv", comparison.str());
}

std::vector<VbrTempPoint> read_points_csv(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("calibration", "cannot open " + path);
  std::vector<VbrTempPoint> points;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    std::istringstream ss(line);
    VbrTempPoint p;
    char comma = 0;
    if (!(ss >> p.temperature_c >> comma >> p.vbr_volt) || comma != ',')
      throw Error(path + " line " + std::to_string(line_no) + ": expected temperature_c,vbr_volt");
    points.push_back(p);
  }
  return points;
}

void cmd_thermal(Run &run) {
  Json &cfg = run.cfg;
  allow_keys(cfg, {"input", "fit", "calibration", "small_bound_k_per_w", "seed", "out"});
  VbrTempFit fit;
  if (cfg.contains("fit")) {
    const Json &f = cfg["fit"];
    if (!f.is_object() || !f.contains("slope_volt_per_c") || !f.contains("intercept_volt"))
      throw ConfigError("fit", "expected {slope_volt_per_c, intercept_volt}");
    fit.slope_volt_per_c = number_or(f, "slope_volt_per_c", 0.0);
    fit.intercept_volt = number_or(f, "intercept_volt", 0.0);
    fit.r_squared = number_or(f, "r_squared", 1.0);
  } else if (cfg.contains("calibration")) {
    const auto points = read_points_csv(run.resolve(string_or(cfg, "calibration", "")));
    fit = fit_vbr_temperature(points);
  } else {
    throw ConfigError("fit", "give fit coefficients or a calibration csv");
  }
  const std::string input = run.resolve(string_or(cfg, "input", ""));
  std::ifstream in(input);
  if (!in)
    throw ConfigError("input", "cannot open " + input);
  const ThermalSummary s =
      thermal_pipeline(fit, read_thermal_csv(in), number_or(cfg, "small_bound_k_per_w", 25.0));
  for (const auto &row : s.rows)
    if (!row.error.empty())
      run.report_error("input", row.error);

  std::ostringstream csv;
  write_thermal_csv(s, csv);
  run.write("thermal.csv", csv.str());
  Json summary = {{"provenance", provenance(cfg, run.seed)},
                  {"fit",
                   {{"slope_volt_per_c", fit.slope_volt_per_c},
                    {"intercept_volt", fit.intercept_volt},
                    {"r_squared", fit.r_squared}}},
                  {"rows", s.rows.size()},
                  {"row_errors", s.row_errors},
                  {"median_r_thermal_k_per_w",
                   s.median_r_thermal_k_per_w ? Json(*s.median_r_thermal_k_per_w) : Json(nullptr)},
                  {"small_thermal_resistance", s.small_thermal_resistance}};
  run.write("thermal_summary.json", dump_json(summary));
}

void cmd_scan(Run &run) {
  const Json &cfg = run.cfg;
  allow_keys(cfg, {"preset", "apd", "circuit", "anneal", "grid", "spot_fwhm_m", "dwell_s",
                   "dark_dwell_s", "temperature_c", "v_excess_volt", "photon_rate_hz",
                   "anneal_plan", "seed", "out", "name"});
  const Preset p = resolve_detector(cfg, string_or(cfg, "preset", ""));
  ApdState apd = p.apd;
  if (cfg.contains("anneal_plan"))
    for (const auto &step : plan_from_json(cfg["anneal_plan"], "anneal_plan"))
      apd = apply_anneal(apd, p.anneal, step);
  ScanGrid grid;
  if (cfg.contains("grid")) {
    grid.extent_m = number_or(cfg["grid"], "extent_m", grid.extent_m);
    grid.step_m = number_or(cfg["grid"], "step_m", grid.step_m);
  }
  ScanOptions opt;
  opt.spot_fwhm_m = number_or(cfg, "spot_fwhm_m", opt.spot_fwhm_m);
  opt.dwell_s = number_or(cfg, "dwell_s", opt.dwell_s);
  opt.dark_dwell_s = number_or(cfg, "dark_dwell_s", opt.dark_dwell_s);
  opt.temperature_c = number_or(cfg, "temperature_c", opt.temperature_c);
  opt.v_excess_volt = number_or(cfg, "v_excess_volt", opt.v_excess_volt);
  opt.photon_rate_hz = number_or(cfg, "photon_rate_hz", opt.photon_rate_hz);
  opt.seed = run.seed;
  const EfficiencyMap map = efficiency_scan(apd, p.circuit, grid, opt);

  const std::string name = string_or(cfg, "name", detector_name(p));
  std::ostringstream csv;
  write_scan_csv(map, csv);
  run.write(name + ".scan.csv", csv.str());
  Json summary = {{"provenance", provenance(cfg, run.seed)},
                  {"sample_id", apd.sample_id},
                  {"points_per_axis", map.n},
                  {"step_m", map.step_m},
                  {"dark_rate_hz", map.dark_rate_hz},
                  {"detector_failed", apd.failed},
                  {"scan", name + ".scan.csv"}};
  run.write(name + ".scan.json", dump_json(summary));
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Geiger-mode APD simulation, characterization and annealing campaigns"};
  app.set_version_flag("--version", GEIGERLAB_VERSION);
  app.require_subcommand(1);
  Flags f;

  struct Sub {
    CLI::App *app;
    void (*fn)(Run &);
  };
  std::vector<Sub> subs = {
      {app.add_subcommand("simulate", "Simulate a detector and write a .gtag stream"), cmd_simulate},
      {app.add_subcommand("characterize", "Characterization report from streams or a preset"),
       cmd_characterize},
      {app.add_subcommand("campaign", "Anneal/characterize campaigns with a dark-rate reduction table"),
       cmd_campaign},
      {app.add_subcommand("thermal", "Thermal resistance from breakdown-voltage readings"),
       cmd_thermal},
      {app.add_subcommand("scan", "Spatial detection-efficiency map"), cmd_scan},
  };
  for (auto &s : subs) {
    s.app->add_option("--config", f.config, "JSON config file");
    s.app->add_option("--seed", f.seed, "RNG seed");
    s.app->add_option("--out", f.out, "Output directory");
    s.app->add_option("--preset", f.preset, "Bundled detector preset");
    s.app->add_option("--duration-s", f.duration_s, "Run duration in seconds");
    s.app->add_option("--power-w", f.power_w, "Anneal power in watts");
    s.app->add_option("--dead-time-s", f.dead_time_s, "Dead time in seconds");
    s.app->add_option("--bins-per-decade", f.bins_per_decade, "Histogram bins per decade");
    if (s.fn == cmd_characterize)
      s.app->add_option("inputs", f.inputs, "Input .gtag streams");
  }
  CLI11_PARSE(app, argc, argv);

  Run run;
  const Sub *active = nullptr;
  for (const auto &s : subs)
    if (s.app->parsed())
      active = &s;
  run.command = active->app->get_name();
  auto given = [&](const char *flag) { return active->app->count(flag) > 0; };

  try {
    run.cfg = Json::object();
    run.base_dir = fs::current_path();
    if (!f.config.empty()) {
      run.cfg = read_json_file(f.config);
      run.base_dir = fs::absolute(f.config).parent_path();
    } else if (run.command == "thermal") {
      const std::string bundled = std::string(GEIGERLAB_DATA_DIR) + "/thermal.json";
      run.cfg = read_json_file(bundled);
      run.base_dir = GEIGERLAB_DATA_DIR;
    }
    if (!run.cfg.is_object())
      throw ConfigError("config", "expected a JSON object");
    Json &cfg = run.cfg;
    // flags win over the config file
    if (given("--preset"))
      cfg["preset"] = f.preset;
    if (given("--seed"))
      cfg["seed"] = f.seed;
    if (given("--out"))
      cfg["out"] = fs::absolute(f.out).string(); // flags resolve against the working directory
    if (!f.inputs.empty()) {
      cfg["inputs"] = Json::array();
      for (const auto &in : f.inputs)
        cfg["inputs"].push_back(fs::absolute(in).string());
    }
    const std::string &cmd = run.command;
    if (given("--duration-s")) {
      if (cmd == "simulate")
        cfg["scenario"]["duration_s"] = f.duration_s;
      else if (cmd == "characterize" || cmd == "campaign")
        cfg["characterization"]["dark_duration_s"] = f.duration_s;
      else if (cmd == "scan")
        cfg["dwell_s"] = f.duration_s;
      else
        throw ConfigError("--duration-s", "not used by " + cmd);
    }
    if (given("--dead-time-s")) {
      if (cmd == "characterize")
        cfg["dead_time_s"] = f.dead_time_s;
      else if (cmd == "thermal")
        throw ConfigError("--dead-time-s", "not used by thermal");
      else
        cfg["circuit"]["dead_time_s"] = f.dead_time_s;
    }
    if (given("--power-w")) {
      if (cmd == "campaign")
        cfg["plan"] = Json::array({f.power_w});
      else if (cmd == "scan")
        cfg["anneal_plan"] = Json::array({f.power_w});
      else
        throw ConfigError("--power-w", "not used by " + cmd);
    }
    if (given("--bins-per-decade")) {
      if (cmd == "characterize")
        cfg["histogram"]["bins_per_decade"] = f.bins_per_decade;
      else if (cmd == "campaign")
        cfg["characterization"]["histogram"]["bins_per_decade"] = f.bins_per_decade;
      else
        throw ConfigError("--bins-per-decade", "not used by " + cmd);
    }
    if (cfg.contains("seed")) {
      if (!cfg["seed"].is_number_unsigned())
        throw ConfigError("seed", "expected a non-negative integer");
      run.seed = cfg["seed"].get<std::uint64_t>();
    }
    run.out = run.resolve(string_or(cfg, "out", "out"));
    active->fn(run);
  } catch (const std::exception &e) {
    run.report_error(e);
  }
  return run.errors == 0 ? 0 : 1;
}
