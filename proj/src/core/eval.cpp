#include "core/eval.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "core/errors.hpp"
#include "core/svg.hpp"

namespace stnav {
namespace eval {

double velocity_rmse(const std::vector<Vec3>& est, const std::vector<Vec3>& gt) {
    if (est.size() != gt.size()) {
        throw DataError("velocity_rmse: sequence length mismatch");
    }
    if (est.empty()) throw DataError("velocity_rmse: empty sequences");
    double s = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i) {
        s += (est[i] - gt[i]).squaredNorm();
    }
    return std::sqrt(s / static_cast<double>(est.size()));
}

double afpe(const Vec3& p_final_est, const Vec3& p_final_gt) {
    return (p_final_est - p_final_gt).cwiseAbs().sum() / 3.0;
}

namespace {

const char* method_name(Method m) {
    switch (m) {
        case Method::StAided: return "st_aided_ekf";
        case Method::PureIns: return "pure_ins";
        case Method::OracleAided: return "oracle_aided_ekf";
        case Method::NoOutage: return "no_outage";
    }
    return "?";
}

// Ground-truth body velocity at an integer DVL epoch.
Vec3 gt_body_velocity(const sim::MissionRecord& mission, long epoch) {
    const auto rate = static_cast<long>(std::llround(mission.imu_rate_hz));
    const auto& gt = mission.ground_truth.at(static_cast<std::size_t>(epoch * rate));
    return gt.C_bn.transpose() * gt.v_n;
}

}  // namespace

RunResult run_method(const sim::MissionRecord& mission,
                     const OutageScenario& scenario, Method method,
                     const st::StWeights* weights, const EvalParams& params) {
    const auto rate = static_cast<long>(std::llround(mission.imu_rate_hz));
    const double dt = 1.0 / mission.imu_rate_hz;
    const double t_end = scenario.t_init + scenario.t_duration;
    if (mission.ground_truth.empty() || mission.imu.empty()) {
        throw DataError("run_method: empty mission");
    }
    const double mission_end = mission.ground_truth.back().t;
    if (method != Method::NoOutage &&
        (scenario.t_init < 0.0 || t_end > mission_end)) {
        throw DataError("run_method: outage window outside mission span");
    }

    // DVL stream with the outage applied (NoOutage keeps every epoch).
    std::vector<dvl::DvlMeasurement> stream = mission.dvl;
    if (method != Method::NoOutage && scenario.t_duration > 0.0) {
        stream = dvl::apply_outage(std::move(stream), scenario.t_init,
                                   scenario.t_duration);
    }

    // Surrogate measurements for the masked epochs.
    std::map<long, Vec3> surrogate;
    if (method == Method::StAided && scenario.t_duration > 0.0) {
        if (weights == nullptr) throw UsageError("run_method: weights required");
        std::deque<Vec3> ring;
        for (const auto& m : stream) {
            if (m.valid && m.t < scenario.t_init) {
                ring.push_back(m.body_velocity);
                if (ring.size() > static_cast<std::size_t>(weights->hp.dvl_window)) {
                    ring.pop_front();
                }
            }
        }
        if (ring.size() != static_cast<std::size_t>(weights->hp.dvl_window)) {
            throw DataError("run_method: insufficient DVL history before the outage");
        }
        for (const auto& m : st::predict_outage_sequence(
                 ring, mission.imu, mission.imu_rate_hz, *weights, params.geom,
                 scenario.t_init, scenario.t_duration)) {
            surrogate[static_cast<long>(std::llround(m.t))] = m.body_velocity;
        }
    } else if (method == Method::OracleAided && scenario.t_duration > 0.0) {
        for (const auto& m : stream) {
            if (!m.valid) {
                const long e = static_cast<long>(std::llround(m.t));
                surrogate[e] = gt_body_velocity(mission, e);
            }
        }
    }

    ins::NavState init = mission.ground_truth.front();
    init.b_a = Vec3::Zero();
    init.b_g = Vec3::Zero();
    ekf::Filter filter(init, params.filter);

    RunResult result;
    result.scenario = scenario;
    result.method = method;
    auto& series = result.series;
    series.t.reserve(mission.imu.size() + 1);
    series.v_n.reserve(mission.imu.size() + 1);
    series.p_n.reserve(mission.imu.size() + 1);
    series.t.push_back(0.0);
    series.v_n.push_back(filter.state().v_n);
    series.p_n.push_back(filter.state().p_n);

    for (std::size_t k = 0; k < mission.imu.size(); ++k) {
        filter.propagate(mission.imu[k], dt);
        const long step = static_cast<long>(k) + 1;
        if (step % rate == 0) {
            const long epoch = step / rate;
            if (epoch >= 1 && epoch <= static_cast<long>(stream.size())) {
                const auto& meas = stream[static_cast<std::size_t>(epoch - 1)];
                if (meas.valid) {
                    filter.update_velocity(meas.body_velocity, 1.0);
                } else if (auto it = surrogate.find(epoch); it != surrogate.end()) {
                    filter.update_velocity(it->second, params.r_inflation_predicted);
                }
            }
        }
        series.t.push_back(filter.state().t);
        series.v_n.push_back(filter.state().v_n);
        series.p_n.push_back(filter.state().p_n);
    }

    // Velocity RMSE across the outage window at the IMU rate.
    const long w_begin = static_cast<long>(std::ceil(scenario.t_init * mission.imu_rate_hz - 1e-9));
    const long w_end = static_cast<long>(std::ceil(t_end * mission.imu_rate_hz - 1e-9));
    std::vector<Vec3> v_est, v_gt;
    for (long i = w_begin; i < w_end && i < static_cast<long>(series.v_n.size()); ++i) {
        v_est.push_back(series.v_n[static_cast<std::size_t>(i)]);
        v_gt.push_back(mission.ground_truth[static_cast<std::size_t>(i)].v_n);
    }
    if (!v_est.empty()) {
        result.metrics.vel_rmse = velocity_rmse(v_est, v_gt);
    }

    // Position over [t_init, t_end + tail], both methods re-anchored to the
    // ground-truth position at the window start so only outage-induced
    // drift is measured.
    const long p_end = std::min(static_cast<long>(series.p_n.size()) - 1,
                                static_cast<long>(std::llround((t_end + params.tail_s) * mission.imu_rate_hz)));
    if (w_begin <= p_end && w_begin >= 0) {
        const Vec3 anchor_gt = mission.ground_truth[static_cast<std::size_t>(w_begin)].p_n;
        const Vec3 anchor_est = series.p_n[static_cast<std::size_t>(w_begin)];
        double s = 0.0;
        long n = 0;
        Vec3 last_est = Vec3::Zero(), last_gt = Vec3::Zero();
        for (long i = w_begin; i <= p_end; ++i) {
            const Vec3 p_est = anchor_gt + (series.p_n[static_cast<std::size_t>(i)] - anchor_est);
            const Vec3 p_gt = mission.ground_truth[static_cast<std::size_t>(i)].p_n;
            s += (p_est - p_gt).squaredNorm();
            last_est = p_est;
            last_gt = p_gt;
            ++n;
        }
        result.metrics.pos_rmse = std::sqrt(s / static_cast<double>(n));
        result.metrics.afpe = afpe(last_est, last_gt);
    }
    return result;
}

RunResult run_st_aided(const sim::MissionRecord& mission,
                       const OutageScenario& scenario,
                       const st::StWeights& weights, const EvalParams& params) {
    return run_method(mission, scenario, Method::StAided, &weights, params);
}

RunResult run_pure_ins(const sim::MissionRecord& mission,
                       const OutageScenario& scenario, const EvalParams& params) {
    return run_method(mission, scenario, Method::PureIns, nullptr, params);
}

SweepReport sweep(const std::vector<sim::MissionRecord>& missions,
                  const st::StWeights& weights, const EvalParams& params,
                  const SweepConfig& config) {
    if (config.n_starts < 1) throw UsageError("sweep: n_starts must be >= 1");
    if (missions.empty()) throw DataError("sweep: no evaluation missions");
    if (config.durations.empty()) throw UsageError("sweep: no durations");

    double max_duration = 0.0;
    for (double d : config.durations) max_duration = std::max(max_duration, d);

    struct Job {
        std::size_t mission_idx;
        OutageScenario scenario;
    };
    std::vector<Job> jobs;
    for (std::size_t mi = 0; mi < missions.size(); ++mi) {
        const auto& mission = missions[mi];
        const double t_max =
            mission.ground_truth.back().t - max_duration - params.guard_s;
        if (t_max <= params.warmup_s) {
            throw DataError("sweep: mission " + mission.name +
                            " too short for the outage protocol");
        }
        // Start times are shared across durations, as in the evaluation
        // protocol: sample once per mission, then test every duration.
        Rng rng = Rng(config.seed).fork(0xe0 + mi);
        std::vector<double> starts;
        for (int s = 0; s < config.n_starts; ++s) {
            starts.push_back(rng.uniform(params.warmup_s, t_max));
        }
        for (double duration : config.durations) {
            for (int s = 0; s < config.n_starts; ++s) {
                OutageScenario sc;
                sc.mission = mission.name;
                sc.t_init = starts[static_cast<std::size_t>(s)];
                sc.t_duration = duration;
                sc.seed = rng.fork(static_cast<std::uint64_t>(s)).seed();
                jobs.push_back({mi, sc});
            }
        }
    }

    struct JobResult {
        RunResult st;
        RunResult pure;
    };
    std::vector<JobResult> results(jobs.size());
    std::atomic<std::size_t> next{0};
    unsigned n_workers = config.workers > 0
                             ? static_cast<unsigned>(config.workers)
                             : std::max(1u, std::thread::hardware_concurrency());
    n_workers = std::min<unsigned>(n_workers, static_cast<unsigned>(jobs.size()));
    std::vector<std::thread> pool;
    std::atomic<bool> failed{false};
    std::string error_msg;
    std::mutex error_mutex;
    for (unsigned w = 0; w < n_workers; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= jobs.size() || failed.load()) break;
                try {
                    const auto& job = jobs[i];
                    results[i].st = run_method(missions[job.mission_idx], job.scenario,
                                               Method::StAided, &weights, params);
                    results[i].pure = run_method(missions[job.mission_idx], job.scenario,
                                                 Method::PureIns, nullptr, params);
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    error_msg = e.what();
                    failed.store(true);
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failed.load()) throw DataError("sweep: " + error_msg);

    SweepReport report;
    std::map<std::pair<std::string, double>, std::vector<const JobResult*>> cells;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const auto& job = jobs[i];
        const auto& jr = results[i];
        for (const RunResult* rr : {&jr.st, &jr.pure}) {
            ScenarioRow row;
            row.mission = job.scenario.mission;
            row.duration = job.scenario.t_duration;
            row.start = job.scenario.t_init;
            row.method = method_name(rr->method);
            row.metrics = rr->metrics;
            report.scenarios.push_back(row);
        }
        cells[{job.scenario.mission, job.scenario.t_duration}].push_back(&results[i]);

        if (config.write_svg) {
            namespace fs = std::filesystem;
            fs::create_directories(config.svg_dir);
            const auto& mission = missions[job.mission_idx];
            const auto decimate = [](const std::vector<Vec3>& pts, std::size_t hop) {
                std::vector<Vec3> out;
                for (std::size_t k = 0; k < pts.size(); k += hop) out.push_back(pts[k]);
                return out;
            };
            std::vector<Vec3> gt_pts;
            for (std::size_t k = 0; k < mission.ground_truth.size(); k += 100)
                gt_pts.push_back(mission.ground_truth[k].p_n);
            char fname[160];
            std::snprintf(fname, sizeof(fname), "%s/%s_d%02.0f_s%04.0f.svg",
                          config.svg_dir.c_str(), job.scenario.mission.c_str(),
                          job.scenario.t_duration, job.scenario.t_init);
            char title[160];
            std::snprintf(title, sizeof(title), "%s outage %.0f s @ %.1f s",
                          job.scenario.mission.c_str(), job.scenario.t_duration,
                          job.scenario.t_init);
            svg::write_trajectory_plot(
                fname,
                {{"GT", "#1f77b4", gt_pts},
                 {"ST-AidedEKF", "#ff7f0e", decimate(jr.st.series.p_n, 100)},
                 {"PureINS", "#2ca02c", decimate(jr.pure.series.p_n, 100)}},
                mission.ground_truth.front().p_n, title);
        }
    }

    for (const auto& [key, group] : cells) {
        SummaryRow row;
        row.mission = key.first;
        row.duration = key.second;
        const double n = static_cast<double>(group.size());
        for (const JobResult* jr : group) {
            row.st_mean.vel_rmse += jr->st.metrics.vel_rmse / n;
            row.st_mean.pos_rmse += jr->st.metrics.pos_rmse / n;
            row.st_mean.afpe += jr->st.metrics.afpe / n;
            row.pure_mean.vel_rmse += jr->pure.metrics.vel_rmse / n;
            row.pure_mean.pos_rmse += jr->pure.metrics.pos_rmse / n;
            row.pure_mean.afpe += jr->pure.metrics.afpe / n;
        }
        const auto improvement = [](double base, double ours) {
            return base > 0.0 ? (base - ours) / base * 100.0 : 0.0;
        };
        row.vel_improvement_pct = improvement(row.pure_mean.vel_rmse, row.st_mean.vel_rmse);
        row.pos_improvement_pct = improvement(row.pure_mean.pos_rmse, row.st_mean.pos_rmse);
        row.afpe_improvement_pct = improvement(row.pure_mean.afpe, row.st_mean.afpe);
        report.summary.push_back(row);
    }
    return report;
}

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void write_scenario_csv(const SweepReport& report, const std::string& path,
                        const std::string& comment) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path);
    if (!comment.empty()) f << "# " << comment << "\n";
    f << "mission,duration,start,method,vel_rmse,pos_rmse,afpe\n";
    for (const auto& row : report.scenarios) {
        f << row.mission << ',' << fmt(row.duration) << ',' << fmt(row.start)
          << ',' << row.method << ',' << fmt(row.metrics.vel_rmse) << ','
          << fmt(row.metrics.pos_rmse) << ',' << fmt(row.metrics.afpe) << "\n";
    }
}

void write_summary_csv(const SweepReport& report, const std::string& path,
                       const std::string& comment) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path);
    if (!comment.empty()) f << "# " << comment << "\n";
    f << "mission,duration,st_vel_rmse,pure_vel_rmse,vel_improvement_pct,"
         "st_pos_rmse,pure_pos_rmse,pos_improvement_pct,"
         "st_afpe,pure_afpe,afpe_improvement_pct\n";
    for (const auto& row : report.summary) {
        f << row.mission << ',' << fmt(row.duration) << ','
          << fmt(row.st_mean.vel_rmse) << ',' << fmt(row.pure_mean.vel_rmse) << ','
          << fmt(row.vel_improvement_pct) << ',' << fmt(row.st_mean.pos_rmse) << ','
          << fmt(row.pure_mean.pos_rmse) << ',' << fmt(row.pos_improvement_pct) << ','
          << fmt(row.st_mean.afpe) << ',' << fmt(row.pure_mean.afpe) << ','
          << fmt(row.afpe_improvement_pct) << "\n";
    }
}

}  // namespace eval
}  // namespace stnav
