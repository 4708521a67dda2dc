#include "geigerlab/thermal.hpp"
#include "geigerlab/error.hpp"
#include "geigerlab/util.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace geigerlab {

VbrTempFit fit_vbr_temperature(std::span<const VbrTempPoint> points) {
  if (points.size() < 3)
    throw Error("fit_vbr_temperature: need at least 3 points");
  const double n = static_cast<double>(points.size());
  double mt = 0, mv = 0;
  for (const auto &p : points) {
    mt += p.temperature_c;
    mv += p.vbr_volt;
  }
  mt /= n;
  mv /= n;
  double stt = 0, stv = 0, svv = 0;
  for (const auto &p : points) {
    const double dt = p.temperature_c - mt, dv = p.vbr_volt - mv;
    stt += dt * dt;
    stv += dt * dv;
    svv += dv * dv;
  }
  if (!(stt > 0))
    throw Error("fit_vbr_temperature: all temperatures are equal");
  VbrTempFit fit;
  fit.slope_volt_per_c = stv / stt;
  fit.intercept_volt = mv - fit.slope_volt_per_c * mt;
  double ss_res = 0;
  for (const auto &p : points) {
    const double r = p.vbr_volt - (fit.intercept_volt + fit.slope_volt_per_c * p.temperature_c);
    ss_res += r * r;
  }
  fit.r_squared = svv > 0 ? std::clamp(1.0 - ss_res / svv, 0.0, 1.0) : 1.0;
  return fit;
}

double power_dissipation(double avalanche_current_a, double vbr_volt) {
  if (!(avalanche_current_a >= 0) || !(vbr_volt >= 0))
    throw Error("power_dissipation: inputs must be >= 0");
  return avalanche_current_a * vbr_volt;
}

double thermal_resistance(double apd_temp_c, double thermistor_temp_c, double power_w) {
  if (!(power_w > 0))
    throw Error("thermal_resistance: power must be > 0");
  return (apd_temp_c - thermistor_temp_c) / power_w;
}

double infer_apd_temperature(const VbrTempFit &fit, double vbr_observed_volt) {
  if (fit.slope_volt_per_c == 0)
    throw Error("infer_apd_temperature: slope is zero");
  return (vbr_observed_volt - fit.intercept_volt) / fit.slope_volt_per_c;
}

namespace {

std::vector<std::string> split_csv(const std::string &line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ','))
    out.push_back(cell);
  if (!line.empty() && line.back() == ',')
    out.emplace_back();
  for (auto &c : out) {
    const auto b = c.find_first_not_of(" \t\r");
    const auto e = c.find_last_not_of(" \t\r");
    c = b == std::string::npos ? std::string{} : c.substr(b, e - b + 1);
  }
  return out;
}

} // namespace

std::vector<std::pair<std::size_t, ThermalInput>> read_thermal_csv(std::istream &in) {
  static const char *kColumns[] = {"v_bias", "vbr", "thermistor_temp", "avalanche_current"};
  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, std::size_t> index;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    const auto cells = split_csv(line);
    for (std::size_t i = 0; i < cells.size(); ++i)
      index[cells[i]] = i;
    break;
  }
  for (const char *c : kColumns)
    if (!index.count(c))
      throw Error("thermal csv line " + std::to_string(line_no) + ": missing column '" + c + "'");

  std::vector<std::pair<std::size_t, ThermalInput>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    const auto cells = split_csv(line);
    double v[4];
    for (int k = 0; k < 4; ++k) {
      const std::size_t col = index[kColumns[k]];
      std::size_t used = 0;
      bool ok = col < cells.size() && !cells[col].empty();
      if (ok) {
        try {
          v[k] = std::stod(cells[col], &used);
        } catch (const std::exception &) {
          ok = false;
        }
        ok = ok && used == cells[col].size() && std::isfinite(v[k]);
      }
      if (!ok)
        throw Error("thermal csv line " + std::to_string(line_no) + ": bad value in column '" +
                    kColumns[k] + "'");
    }
    rows.push_back({line_no, {v[0], v[1], v[2], v[3]}});
  }
  return rows;
}

ThermalSummary thermal_pipeline(const VbrTempFit &fit,
                                const std::vector<std::pair<std::size_t, ThermalInput>> &rows,
                                double small_bound_k_per_w) {
  ThermalSummary s;
  std::vector<double> values;
  for (const auto &[line, in] : rows) {
    ThermalRow row;
    row.input = in;
    row.line = line;
    try {
      row.apd_temp_c = infer_apd_temperature(fit, in.vbr_volt);
      row.delta_t_c = row.apd_temp_c - in.thermistor_temp_c;
      row.power_w = power_dissipation(in.avalanche_current_a, in.vbr_volt);
      row.r_thermal_k_per_w = thermal_resistance(row.apd_temp_c, in.thermistor_temp_c, row.power_w);
      values.push_back(*row.r_thermal_k_per_w);
    } catch (const Error &e) {
      row.error = "line " + std::to_string(line) + ": " + e.what();
      ++s.row_errors;
    }
    s.rows.push_back(std::move(row));
  }
  if (!values.empty()) {
    std::sort(values.begin(), values.end());
    const std::size_t m = values.size() / 2;
    s.median_r_thermal_k_per_w =
        values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
    s.small_thermal_resistance = std::abs(*s.median_r_thermal_k_per_w) < small_bound_k_per_w;
  }
  return s;
}

void write_thermal_csv(const ThermalSummary &summary, std::ostream &out) {
  out << "v_bias,vbr,thermistor_temp,avalanche_current,apd_temp,delta_t,power_w,r_thermal,"
         "readout_resistor_ohm,error\n";
  for (const auto &r : summary.rows) {
    out << format_double(r.input.v_bias_volt) << ',' << format_double(r.input.vbr_volt) << ','
        << format_double(r.input.thermistor_temp_c) << ','
        << format_double(r.input.avalanche_current_a) << ',';
    if (r.error.empty())
      out << format_double(r.apd_temp_c) << ',' << format_double(r.delta_t_c) << ','
          << format_double(r.power_w) << ',' << format_double(*r.r_thermal_k_per_w);
    else
      out << ",,,";
    out << ',' << format_double(r.readout_resistor_ohm) << ',';
    if (r.error.find_first_of(",\"\n") == std::string::npos) {
      out << r.error;
    } else {
      out << '"';
      for (char c : r.error)
        out << (c == '"' ? "\"\"" : std::string(1, c));
      out << '"';
    }
    out << '\n';
  }
}

} // namespace geigerlab
