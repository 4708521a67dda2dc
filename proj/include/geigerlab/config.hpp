#pragma once

// JSON configuration and report serialization. Readers reject unknown keys and
// wrong types with ConfigError carrying the dotted field path.

#include "geigerlab/anneal.hpp"
#include "geigerlab/apd.hpp"
#include "geigerlab/charlab.hpp"
#include "geigerlab/histogram.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace geigerlab {

using Json = nlohmann::ordered_json;

QuenchCircuit circuit_from_json(const Json &j, const std::string &path = "circuit");
Json to_json(const QuenchCircuit &c);

ApdState apd_from_json(const Json &j, const std::string &path = "apd");
Json to_json(const ApdState &apd);

Illumination illumination_from_json(const Json &j, const std::string &path);
Json to_json(const Illumination &light);
Scenario scenario_from_json(const Json &j, const std::string &path = "scenario");
Json to_json(const Scenario &s);

HistogramSpec histogram_from_json(const Json &j, const std::string &path = "histogram");
Json to_json(const HistogramSpec &h);

CharConfig char_config_from_json(const Json &j, const std::string &path = "characterization");
Json to_json(const CharConfig &c);

AnnealResponse anneal_from_json(const Json &j, const std::string &path = "anneal");
Json to_json(const AnnealResponse &r);
AnnealStep step_from_json(const Json &j, const std::string &path);
Json to_json(const AnnealStep &s);
std::vector<AnnealStep> plan_from_json(const Json &j, const std::string &path = "plan");
StopRules stop_rules_from_json(const Json &j, const std::string &path = "stop_rules");
Json to_json(const StopRules &r);

/// Bundled detector: state, circuit, anneal response, published plan and the
/// characterization point it is reported at.
struct Preset {
  std::string name;
  ApdState apd;
  QuenchCircuit circuit;
  AnnealResponse anneal;
  std::vector<AnnealStep> plan;
  CharConfig characterization;
  Table1Row reference;   // published values the calibration targets
};

Preset preset_from_json(const Json &j);
Json to_json(const Preset &p);

/// GEIGERLAB_PRESET_DIR when set, else the bundled data/presets.
std::string preset_dir();
std::vector<std::string> preset_names();
Json load_preset_json(const std::string &name);
Preset load_preset(const std::string &name);

Json to_json(const AfterpulseAnalysis &a);
Json to_json(const CharReport &r);
Json to_json(const Table1Row &row);
Json to_json(const CampaignLog &log);

/// Provenance block: tool version, FNV-1a hash of the canonical config, seed.
Json provenance(const Json &config, std::uint64_t seed);
std::string dump_json(const Json &j);

void write_histogram_csv(const ExpBinHistogram &h, std::ostream &out);
void write_table1_csv(const std::vector<Table1Row> &rows, std::ostream &out);
void write_scan_csv(const EfficiencyMap &map, std::ostream &out);

/// Parse a JSON file; syntax errors become ConfigError on the file path.
Json read_json_file(const std::string &path);
/// Write to a sibling temporary, then rename over the destination.
void write_file_atomic(const std::string &path, const std::string &content);

} // namespace geigerlab
