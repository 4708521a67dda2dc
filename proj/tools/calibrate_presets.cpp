// Regenerates data/presets/*.json from the published per-sample targets.

#include "preset_calibration.hpp"

#include "geigerlab/error.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char **argv) {
  CLI::App app{"Fit and write the bundled detector presets"};
  std::string out = std::string(GEIGERLAB_DATA_DIR) + "/presets";
  app.add_option("--out", out, "Output directory");
  CLI11_PARSE(app, argc, argv);
  try {
    for (const auto &p : geigerlab::calibration::calibrate_all()) {
      const std::string path = out + "/" + p.name + ".json";
      geigerlab::write_file_atomic(path, geigerlab::dump_json(geigerlab::to_json(p)));
      std::cout << path << "  nu=" << p.anneal.heal.rate_prefactor_per_s << '\n';
    }
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
