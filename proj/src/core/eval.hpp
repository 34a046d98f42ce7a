#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core/ekf.hpp"
#include "core/set_transformer.hpp"
#include "core/sim_data.hpp"

namespace stnav {
namespace eval {

struct OutageScenario {
    std::string mission;
    double t_init = 0.0;
    double t_duration = 0.0;
    std::uint64_t seed = 0;
};

// How DVL epochs inside the outage window are handled.
enum class Method {
    StAided,      // network predictions fed as velocity updates
    PureIns,      // no updates during the outage
    OracleAided,  // ground-truth body velocity fed as updates
    NoOutage,     // outage ignored entirely (reference run)
};

struct Metrics {
    double vel_rmse = 0.0;  // [m/s], over the outage window
    double pos_rmse = 0.0;  // [m], outage window plus tail
    double afpe = 0.0;      // [m], at the evaluation endpoint
};

// Full-rate estimate series for one filter run.
struct MethodSeries {
    std::vector<double> t;
    std::vector<Vec3> v_n;
    std::vector<Vec3> p_n;  // filter-integrated position from mission start
};

struct RunResult {
    OutageScenario scenario;
    Method method = Method::StAided;
    MethodSeries series;
    Metrics metrics;
};

struct EvalParams {
    ekf::FilterParams filter;
    dvl::BeamGeometry geom;              // for surrogate beam synthesis
    double r_inflation_predicted = 1.0;  // R scale for network updates
    double warmup_s = 60.0;              // earliest outage start
    double guard_s = 5.0;                // gap kept after the outage end
    double tail_s = 10.0;                // position window extension
};

// Eq.-level metric helpers.
double velocity_rmse(const std::vector<Vec3>& est, const std::vector<Vec3>& gt);
double afpe(const Vec3& p_final_est, const Vec3& p_final_gt);

// Runs one filter pass over the mission with the scenario's outage window.
// weights may be null except for Method::StAided.
RunResult run_method(const sim::MissionRecord& mission,
                     const OutageScenario& scenario, Method method,
                     const st::StWeights* weights, const EvalParams& params);

RunResult run_st_aided(const sim::MissionRecord& mission,
                       const OutageScenario& scenario,
                       const st::StWeights& weights, const EvalParams& params);
RunResult run_pure_ins(const sim::MissionRecord& mission,
                       const OutageScenario& scenario, const EvalParams& params);

struct ScenarioRow {
    std::string mission;
    double duration = 0.0;
    double start = 0.0;
    std::string method;
    Metrics metrics;
};

struct SummaryRow {
    std::string mission;
    double duration = 0.0;
    Metrics st_mean;
    Metrics pure_mean;
    double vel_improvement_pct = 0.0;
    double pos_improvement_pct = 0.0;
    double afpe_improvement_pct = 0.0;
};

struct SweepConfig {
    std::vector<double> durations = {30.0, 40.0, 50.0};
    int n_starts = 5;
    std::uint64_t seed = 0;
    int workers = 0;  // 0 = hardware concurrency
    bool write_svg = false;
    std::string svg_dir;
};

struct SweepReport {
    std::vector<ScenarioRow> scenarios;
    std::vector<SummaryRow> summary;
};

// Paper-style sweep: per mission, n_starts seeded outage start times shared
// across all durations; both methods per scenario; per-cell means and
// improvement percentages. Scenarios evaluate in parallel; aggregation is
// a deterministic reduction ordered by scenario index.
SweepReport sweep(const std::vector<sim::MissionRecord>& missions,
                  const st::StWeights& weights, const EvalParams& params,
                  const SweepConfig& config);

void write_scenario_csv(const SweepReport& report, const std::string& path,
                        const std::string& comment);
void write_summary_csv(const SweepReport& report, const std::string& path,
                       const std::string& comment);

}  // namespace eval
}  // namespace stnav
