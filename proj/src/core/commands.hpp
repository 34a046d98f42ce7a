#pragma once

#include <string>

#include "core/config.hpp"

namespace stnav {
namespace commands {

// Generates every configured mission and writes the CSV triple per mission
// plus manifest.json into out_dir/missions.
void simulate(const config::RunConfig& cfg, const std::string& out_dir);

// Ingests the training missions from data_dir, trains the network, writes
// weights.json and loss_history.csv into out_dir.
void train(const config::RunConfig& cfg, const std::string& data_dir,
           const std::string& out_dir);

// Runs the outage sweep on the evaluation missions with the given weights;
// writes scenarios.csv, summary.csv and optional SVG plots into out_dir.
void evaluate(const config::RunConfig& cfg, const std::string& data_dir,
              const std::string& weights_path, const std::string& out_dir,
              bool force_svg = false);

// Re-aggregates a per-scenario CSV into a summary CSV.
void report(const std::string& scenario_csv, const std::string& out_summary_csv);

}  // namespace commands
}  // namespace stnav
