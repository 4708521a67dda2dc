#include "doctest.h"

#include "geigerlab/config.hpp"
#include "geigerlab/error.hpp"
#include "preset_calibration.hpp"
#include "support.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace geigerlab;

namespace {

std::string slurp(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string error_path(const std::function<void()> &f) {
  try {
    f();
  } catch (const ConfigError &e) {
    return e.path();
  }
  return "<no error>";
}

} // namespace

TEST_CASE("detector state round-trips through JSON") {
  ApdState a = support::plain_apd(12.5, 0.55);
  a.traps = {{1.5, 0.3e-6, 0.2}, {0.5, 4e-6, 0.05}};
  a.failed = true;
  const Json j = to_json(a);
  const ApdState b = apd_from_json(j);
  CHECK(to_json(b) == j);
  CHECK(b.traps.size() == 2);
  CHECK(b.traps[1].release_tau_s == 4e-6);
  CHECK(b.failed);
}

TEST_CASE("scenarios with every illumination kind round-trip") {
  const std::vector<Illumination> lights{NoLight{}, CwLight{1e4}, PulsedLight{1e5, 1e-10, 0.2},
                                         SpotLight{1e-5, -2e-5, 4e4, 2e-5}};
  for (const auto &l : lights) {
    Scenario s;
    s.duration_s = 12;
    s.rng_seed = 99;
    s.illumination = l;
    const Json j = to_json(s);
    CHECK(to_json(scenario_from_json(j)) == j);
  }
}

TEST_CASE("anneal response, plans and stop rules round-trip") {
  AnnealResponse r;
  r.damage_threshold_watt = 1.6;
  r.trap_creation_coeff = -0.3;
  r.heal.rate_prefactor_per_s = 1e21;
  CHECK(to_json(anneal_from_json(to_json(r))) == to_json(r));
  AnnealStep s;
  s.power_watt = 1.2;
  s.temperature_override_c = 100;
  CHECK(to_json(step_from_json(to_json(s), "step")) == to_json(s));
  // a bare number is a power with default exposure
  const auto plan = plan_from_json(Json::parse("[0.2, {\"power_watt\": 0.4, \"exposure_s\": 30}]"));
  REQUIRE(plan.size() == 2);
  CHECK(plan[0].power_watt == 0.2);
  CHECK(plan[0].exposure_s == 60);
  CHECK(plan[1].exposure_s == 30);
  StopRules rules;
  rules.min_step_reduction = 0.1;
  CHECK(to_json(stop_rules_from_json(to_json(rules))) == to_json(rules));
}

TEST_CASE("unknown keys and wrong types name the field") {
  Json j = to_json(support::plain_apd());
  j["dark"]["activation_energy"] = 0.5;
  CHECK(error_path([&] { apd_from_json(j); }) == "apd.dark.activation_energy");

  Json c = to_json(QuenchCircuit{});
  c["dead_time_s"] = "long";
  CHECK(error_path([&] { circuit_from_json(c); }) == "circuit.dead_time_s");

  Json s = to_json(Scenario{});
  s["illumination"] = {{"kind", "laser"}};
  CHECK(error_path([&] { scenario_from_json(s); }).rfind("scenario.illumination", 0) == 0);

  Json a = to_json(support::plain_apd());
  a.erase("n_tgc");
  CHECK(error_path([&] { apd_from_json(a); }) == "apd.n_tgc");

  Json traps = to_json(support::plain_apd());
  traps["traps"] = Json::array({{{"density", 1.0}, {"release_tau_s", 1e-6}, {"fill_prob", 2.0}}});
  CHECK(error_path([&] { apd_from_json(traps); }).rfind("apd.traps", 0) == 0);

  CHECK(error_path([&] { plan_from_json(Json::parse("[0.2, -1]")); }) == "plan[1].power_watt");
  CHECK(error_path([&] { histogram_from_json(Json::parse("{\"bins_per_decade\": 0}")); }) ==
        "histogram.bins_per_decade");
}

TEST_CASE("nine bundled presets load and validate") {
  const auto names = preset_names();
  REQUIRE(names.size() == 9);
  for (const auto &name : names) {
    const Preset p = load_preset(name);
    CHECK(p.name == name);
    CHECK_NOTHROW(p.apd.validate());
    CHECK_NOTHROW(p.circuit.validate());
    CHECK_NOTHROW(p.anneal.validate());
    CHECK_FALSE(p.plan.empty());
    CHECK(p.characterization.temperature_c == -80.0);
    CHECK(p.plan.back().power_watt == p.reference.power_w);
    CHECK(to_json(preset_from_json(to_json(p))) == to_json(p));
  }
  CHECK_THROWS_AS(load_preset("no-such-detector"), Error);
}

TEST_CASE("bundled presets are exactly the calibration output") {
  for (const auto &t : calibration::published_samples()) {
    const Preset p = calibration::calibrate(t);
    INFO(t.preset);
    CHECK(slurp(preset_dir() + "/" + t.preset + ".json") == dump_json(to_json(p)));
    CHECK(p.reference.before_hz == t.before_hz);
    CHECK(p.reference.lowest_after_hz == t.lowest_after_hz);
  }
}

TEST_CASE("GEIGERLAB_PRESET_DIR overrides the bundled directory") {
  const auto dir = support::temp_dir("presets");
  Json j = load_preset_json("slik-2-pre");
  j["name"] = "custom";
  j["apd"]["sample_id"] = "SLiK-X";
  write_file_atomic((dir / "custom.json").string(), dump_json(j));
  ::setenv("GEIGERLAB_PRESET_DIR", dir.c_str(), 1);
  CHECK(preset_dir() == dir.string());
  CHECK(preset_names() == std::vector<std::string>{"custom"});
  CHECK(load_preset("custom").apd.sample_id == "SLiK-X");
  ::unsetenv("GEIGERLAB_PRESET_DIR");
  CHECK(preset_names().size() == 9);
}

TEST_CASE("provenance hash is stable and sensitive to the config") {
  const Json a = {{"x", 1}, {"y", {1, 2}}};
  const Json b = {{"x", 2}, {"y", {1, 2}}};
  CHECK(provenance(a, 5) == provenance(a, 5));
  CHECK(provenance(a, 5)["config_hash"] != provenance(b, 5)["config_hash"]);
  CHECK(provenance(a, 5)["seed"] == 5);
  CHECK(provenance(a, 5)["config_hash"].get<std::string>().size() == 16);
}

TEST_CASE("CSV writers") {
  std::ostringstream t1;
  write_table1_csv({{"SAP500S2-1", 1579, 2.08, 759.1, 1.4, 20}}, t1);
  CHECK(t1.str() == "sample,before_hz,lowest_after_hz,reduction_factor,power_w,v_excess\n"
                    "SAP500S2-1,1579,2.08,759.1,1.4,20\n");
  ExpBinHistogram h = ExpBinHistogram::with_spec({1e-8, 1e-6, 1});
  h.n_triggers = 10;
  h.counts = {0, 5, 10};
  std::ostringstream hc;
  write_histogram_csv(h, hc);
  std::istringstream lines(hc.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "edge_lo,edge_hi,count,rate");
  std::getline(lines, line);
  CHECK(line == "0,1e-08,0,0");
}

TEST_CASE("atomic writes create parents and leave no temporary") {
  const auto dir = support::temp_dir("atomic");
  const auto path = (dir / "a" / "b" / "out.json").string();
  write_file_atomic(path, "{}\n");
  CHECK(slurp(path) == "{}\n");
  write_file_atomic(path, "[1]\n");
  CHECK(slurp(path) == "[1]\n");
  std::size_t files = 0;
  for (const auto &e : std::filesystem::directory_iterator(dir / "a" / "b")) {
    (void)e;
    ++files;
  }
  CHECK(files == 1);
}

TEST_CASE("malformed JSON files report the path") {
  const auto dir = support::temp_dir("badjson");
  const auto path = (dir / "bad.json").string();
  write_file_atomic(path, "{\"a\": ");
  CHECK(error_path([&] { read_json_file(path); }) == path);
}
