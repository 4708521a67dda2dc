#include "doctest.h"

#include "geigerlab/apd.hpp"
#include "geigerlab/error.hpp"
#include "geigerlab/thermal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

using namespace geigerlab;

namespace {

std::vector<VbrTempPoint> read_points(const std::string &path) {
  std::ifstream in(path);
  REQUIRE(in);
  std::string line;
  std::getline(in, line);
  std::vector<VbrTempPoint> pts;
  char comma;
  VbrTempPoint p;
  while (in >> p.temperature_c >> comma >> p.vbr_volt)
    pts.push_back(p);
  return pts;
}

// Published rows: V_br, R_th.
struct Published {
  double vbr, r_th;
};
const Published kTable2[] = {
    {294.65, -4.8}, {295.05, -10.8}, {295.82, 2.3}, {296.74, 18.0}, {297.10, 8.8}};

} // namespace

TEST_CASE("noiseless line: exact coefficients and R^2 = 1") {
  std::vector<VbrTempPoint> pts;
  for (double t = -30; t <= 20; t += 10)
    pts.push_back({t, 278.0 + 0.75 * t});
  const auto fit = fit_vbr_temperature(pts);
  CHECK(fit.slope_volt_per_c == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(fit.intercept_volt == doctest::Approx(278.0).epsilon(1e-14));
  CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("fit inverts the breakdown model exactly on sampled points") {
  ApdState a;
  a.vbr = {294.0, 0.7, 20.0};
  std::vector<VbrTempPoint> pts;
  for (double t = -30; t <= 20; t += 10)
    pts.push_back({t, breakdown_voltage(a, t)});
  const auto fit = fit_vbr_temperature(pts);
  CHECK(fit.slope_volt_per_c == doctest::Approx(0.7).epsilon(1e-13));
  CHECK(fit.intercept_volt == doctest::Approx(294.0 - 0.7 * 20.0).epsilon(1e-13));
  CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-13));
  for (double t : {-80.0, -31.7, 0.0, 12.25, 90.0})
    CHECK(infer_apd_temperature(fit, breakdown_voltage(a, t)) == doctest::Approx(t).epsilon(1e-9));
}

TEST_CASE("noisy fixture lands in the R^2 = 0.99994 regime") {
  const auto pts = read_points(std::string(GEIGERLAB_DATA_DIR) + "/vbr_temperature_noisy.csv");
  REQUIRE(pts.size() == 14);
  double mean = 0;
  for (const auto &p : pts)
    mean += p.temperature_c;
  mean /= static_cast<double>(pts.size());
  double sxx = 0;
  for (const auto &p : pts)
    sxx += (p.temperature_c - mean) * (p.temperature_c - mean);
  // oracle: noise for an expected R^2 of 0.99994 at slope 0.75 over these temperatures
  const double sigma = 0.75 * std::sqrt(sxx / static_cast<double>(pts.size()) * (1 - 0.99994));
  CHECK(sigma == doctest::Approx(0.117).epsilon(0.01));

  const auto fit = fit_vbr_temperature(pts);
  CHECK(fit.r_squared >= 0.9999);
  CHECK(fit.r_squared < 1.0);
  const double slope_se = sigma / std::sqrt(sxx);
  CHECK(std::abs(fit.slope_volt_per_c - 0.75) < 3 * slope_se);
}

TEST_CASE("fit errors") {
  std::vector<VbrTempPoint> two{{0, 1}, {1, 2}};
  CHECK_THROWS_AS(fit_vbr_temperature(two), Error);
  std::vector<VbrTempPoint> same{{5, 1}, {5, 2}, {5, 3}};
  CHECK_THROWS_AS(fit_vbr_temperature(same), Error);
  CHECK_THROWS_AS(infer_apd_temperature({0.0, 278.0, 1.0}, 280.0), Error);
}

TEST_CASE("power dissipation") {
  CHECK(power_dissipation(160.2e-6, 295.82) * 1e3 == doctest::Approx(47.4).epsilon(0.001));
  CHECK(power_dissipation(0.0, 295.82) == 0.0);
  CHECK(power_dissipation(200e-6, 300.0) == doctest::Approx(60e-3));
  CHECK_THROWS_AS(power_dissipation(-1e-6, 300.0), Error);
}

TEST_CASE("thermal resistance") {
  CHECK(std::abs(thermal_resistance(20.98, 20.0, 54.3e-3) - 18.0) < 0.05);
  CHECK(std::abs(thermal_resistance(20.54, 20.0, 61.5e-3) - 8.8) < 0.05);
  CHECK(thermal_resistance(20.0, 20.0, 0.05) == 0.0);
  CHECK(thermal_resistance(19.0, 20.0, 0.1) < 0); // sign kept
  CHECK_THROWS_AS(thermal_resistance(21.0, 20.0, 0.0), Error);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.01, 10.0);
  for (int i = 0; i < 200; ++i) {
    const double dt = u(rng) - 5.0, p = u(rng), k = u(rng);
    const double r = thermal_resistance(20.0 + dt, 20.0, p);
    CHECK(thermal_resistance(20.0 + k * dt, 20.0, p) == doctest::Approx(k * r).epsilon(1e-9));
    CHECK(thermal_resistance(20.0 + dt, 20.0, k * p) == doctest::Approx(r / k).epsilon(1e-9));
  }
}

TEST_CASE("V_br at the intercept reads as 0 C") {
  const VbrTempFit fit{0.75, 278.0, 1.0};
  CHECK(infer_apd_temperature(fit, 278.0) == 0.0);
}

TEST_CASE("bundled thermal fixture reproduces every reference R_th within 0.1 K/W") {
  std::ifstream in(std::string(GEIGERLAB_DATA_DIR) + "/table2.csv");
  REQUIRE(in);
  const auto rows = read_thermal_csv(in);
  REQUIRE(rows.size() == 5);
  const auto s = thermal_pipeline({0.75, 278.0, 1.0}, rows);
  CHECK(s.row_errors == 0);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(s.rows[i].input.vbr_volt == kTable2[i].vbr);
    REQUIRE(s.rows[i].r_thermal_k_per_w.has_value());
    CHECK(std::abs(*s.rows[i].r_thermal_k_per_w - kTable2[i].r_th) <= 0.1);
    CHECK(s.rows[i].readout_resistor_ohm == 1e3);
  }
  REQUIRE(s.median_r_thermal_k_per_w.has_value());
  CHECK(s.small_thermal_resistance);
}

TEST_CASE("CSV reader: any column order, blank lines, errors with line numbers") {
  std::istringstream ok("avalanche_current,vbr,v_bias,thermistor_temp\n\n1e-4,295,340,20\n");
  const auto rows = read_thermal_csv(ok);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].first == 3);
  CHECK(rows[0].second.v_bias_volt == 340);
  CHECK(rows[0].second.avalanche_current_a == 1e-4);

  std::istringstream bad("v_bias,vbr,thermistor_temp,avalanche_current\n340,295,20,1e-4\n350,x,20,1e-4\n");
  try {
    read_thermal_csv(bad);
    FAIL("expected an error");
  } catch (const Error &e) {
    CHECK(std::string(e.what()) == "thermal csv line 3: bad value in column 'vbr'");
  }
  std::istringstream short_row("v_bias,vbr,thermistor_temp,avalanche_current\n340,295\n");
  CHECK_THROWS_WITH_AS(read_thermal_csv(short_row),
                       "thermal csv line 2: bad value in column 'thermistor_temp'", Error);
  std::istringstream missing("v_bias,vbr,avalanche_current\n");
  CHECK_THROWS_WITH_AS(read_thermal_csv(missing),
                       "thermal csv line 1: missing column 'thermistor_temp'", Error);
}

TEST_CASE("zero-power row is a row-level error, other rows still processed") {
  std::istringstream in("v_bias,vbr,thermistor_temp,avalanche_current\n"
                        "340,294.65,22.36,1.1335e-4\n"
                        "350,295.05,23.17,0\n"
                        "360,295.82,23.65,1.6023e-4\n");
  const auto s = thermal_pipeline({0.75, 278.0, 1.0}, read_thermal_csv(in));
  REQUIRE(s.rows.size() == 3);
  CHECK(s.row_errors == 1);
  CHECK(s.rows[0].r_thermal_k_per_w.has_value());
  CHECK_FALSE(s.rows[1].r_thermal_k_per_w.has_value());
  CHECK(s.rows[1].error.find("line 3") == 0);
  CHECK(s.rows[2].r_thermal_k_per_w.has_value());

  std::ostringstream out;
  write_thermal_csv(s, out);
  std::istringstream lines(out.str());
  std::string header, first, second;
  std::getline(lines, header);
  std::getline(lines, first);
  std::getline(lines, second);
  CHECK(header == "v_bias,vbr,thermistor_temp,avalanche_current,apd_temp,delta_t,power_w,"
                  "r_thermal,readout_resistor_ohm,error");
  CHECK(std::count(first.begin(), first.end(), ',') == 9);
  CHECK(second.find(",,,,1000,line 3") != std::string::npos);
}

TEST_CASE("small-resistance flag follows the bound") {
  std::istringstream in("v_bias,vbr,thermistor_temp,avalanche_current\n"
                        "340,297.0,20.0,1e-4\n");
  const auto rows = read_thermal_csv(in);
  // apd 25.333 C, delta 5.33 K over 29.7 mW: 179.6 K/W
  CHECK_FALSE(thermal_pipeline({0.75, 278.0, 1.0}, rows).small_thermal_resistance);
  CHECK(thermal_pipeline({0.75, 278.0, 1.0}, rows, 200.0).small_thermal_resistance);
}
