#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/eval.hpp"
#include "core/set_transformer.hpp"
#include "core/sim_data.hpp"

namespace stnav {
namespace config {

// Fully-resolved run configuration. Every default that was applied is
// reflected in resolved_json, which also feeds the config hash embedded in
// all artifacts.
struct RunConfig {
    std::uint64_t seed = 0;
    std::string out_dir = "runs/out";
    double imu_rate_hz = 100.0;

    std::vector<sim::TrajectorySpec> train_missions;
    std::vector<sim::TrajectorySpec> eval_missions;

    sim::ImuNoiseParams imu_noise;
    dvl::DvlErrorParams dvl_err;
    double dvl_theta_rad = 20.0 * M_PI / 180.0;

    st::StHyperParams st_hp;
    std::string st_preset = "toy";

    int taylor_order = 2;
    double r_override = 0.0;  // diag R value; 0 derives from the LS solve
    double r_inflation_predicted = 1.0;
    double p0_vel = 0.1;
    double p0_att_rad = 0.5 * M_PI / 180.0;
    double p0_accel_bias = 1e-3 * 9.80665;
    double p0_gyro_bias = 10.0 * M_PI / 180.0 / 3600.0;
    double bias_rw_fraction = 1e-6;  // of the P0 bias scale, per sqrt(s)

    std::vector<double> durations = {30.0, 40.0, 50.0};
    int n_starts = 5;
    double warmup_s = 60.0;
    double guard_s = 5.0;
    double tail_s = 10.0;
    int workers = 0;
    bool write_svg = false;

    std::string resolved_json;  // canonical dump with defaults applied
};

// Parses a config document, applying presets and defaults. Throws
// UsageError on schema violations (a seed is mandatory: runs never consult
// wall-clock time or ambient randomness).
RunConfig parse(const std::string& json_text);
RunConfig load(const std::string& path);

// FNV-1a hash of the resolved document, as 16 hex characters.
std::string hash_hex(const RunConfig& cfg);

dvl::BeamGeometry beam_geometry(const RunConfig& cfg);
ekf::FilterParams filter_params(const RunConfig& cfg);
eval::EvalParams eval_params(const RunConfig& cfg);

// Built-in mission sets. "toy" is a short 4+2 corpus for smoke runs;
// "desk13" mirrors an 11-train / 2-eval split at about 87 minutes total.
std::vector<sim::TrajectorySpec> mission_preset(const std::string& name,
                                                bool eval_split);

}  // namespace config
}  // namespace stnav
