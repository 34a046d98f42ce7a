#include "core/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "core/errors.hpp"

namespace stnav {
namespace commands {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string artifact_comment(const config::RunConfig& cfg, const std::string& what) {
    return "stnav " + what + " config_hash=" + config::hash_hex(cfg) +
           " seed=" + std::to_string(cfg.seed);
}

json load_manifest(const std::string& data_dir) {
    const std::string path = data_dir + "/manifest.json";
    std::ifstream f(path);
    if (!f) throw DataError("cannot open " + path);
    json doc;
    try {
        f >> doc;
    } catch (const json::exception& e) {
        throw DataError(path + ": invalid JSON: " + std::string(e.what()));
    }
    if (doc.value("format", "") != "stnav-manifest") {
        throw DataError(path + ": not a mission manifest");
    }
    return doc;
}

std::vector<sim::MissionRecord> ingest_role(const std::string& data_dir,
                                            const json& manifest,
                                            const std::string& role) {
    std::vector<sim::MissionRecord> out;
    for (const auto& m : manifest.at("missions")) {
        if (m.at("role").get<std::string>() != role) continue;
        out.push_back(sim::ingest_external(
            data_dir + "/" + m.at("imu").get<std::string>(),
            data_dir + "/" + m.at("dvl").get<std::string>(),
            data_dir + "/" + m.at("gt").get<std::string>()));
        out.back().name = m.at("name").get<std::string>();
    }
    if (out.empty()) throw DataError("manifest lists no '" + role + "' missions");
    return out;
}

}  // namespace

void simulate(const config::RunConfig& cfg, const std::string& out_dir) {
    const dvl::BeamGeometry geom = config::beam_geometry(cfg);
    fs::create_directories(out_dir);
    const std::string comment_base = artifact_comment(cfg, "mission");

    json manifest;
    manifest["format"] = "stnav-manifest";
    manifest["version"] = 1;
    manifest["seed"] = cfg.seed;
    manifest["config_hash"] = config::hash_hex(cfg);
    manifest["resolved_config"] = json::parse(cfg.resolved_json);
    json missions = json::array();

    std::uint64_t ordinal = 0;
    const Rng root(cfg.seed);
    for (const auto* group : {&cfg.train_missions, &cfg.eval_missions}) {
        const bool is_train = group == &cfg.train_missions;
        for (const auto& spec : *group) {
            sim::ImuNoiseParams noise = cfg.imu_noise;
            noise.seed = root.fork(1000 + ordinal).seed();
            const sim::MissionRecord rec =
                sim::generate_mission(spec, noise, cfg.dvl_err, geom, cfg.imu_rate_hz);
            sim::export_mission(rec, out_dir, comment_base + " name=" + spec.name);
            json entry;
            entry["name"] = spec.name;
            entry["role"] = is_train ? "train" : "eval";
            entry["imu"] = spec.name + ".imu.csv";
            entry["dvl"] = spec.name + ".dvl.csv";
            entry["gt"] = spec.name + ".gt.csv";
            entry["duration_s"] = spec.duration_s;
            entry["noise_seed"] = noise.seed;
            missions.push_back(std::move(entry));
            ++ordinal;
        }
    }
    manifest["missions"] = std::move(missions);
    std::ofstream f(out_dir + "/manifest.json");
    if (!f) throw DataError("cannot write " + out_dir + "/manifest.json");
    f << manifest.dump(2) << "\n";
}

void train(const config::RunConfig& cfg, const std::string& data_dir,
           const std::string& out_dir) {
    const json manifest = load_manifest(data_dir);
    std::vector<st::TrainingWindow> windows;
    for (const auto& mission : ingest_role(data_dir, manifest, "train")) {
        auto w = sim::build_windows(mission, sim::WindowMode::Disjoint);
        windows.insert(windows.end(), std::make_move_iterator(w.begin()),
                       std::make_move_iterator(w.end()));
    }

    const std::uint64_t train_seed = Rng(cfg.seed).fork(0x7a11).seed();
    const st::TrainResult result = st::train(windows, cfg.st_hp, train_seed);

    fs::create_directories(out_dir);
    st::save_weights(result.best, out_dir + "/weights.json", config::hash_hex(cfg));
    std::ofstream f(out_dir + "/loss_history.csv");
    if (!f) throw DataError("cannot write " + out_dir + "/loss_history.csv");
    f << "# " << artifact_comment(cfg, "loss-history") << "\n";
    f << "epoch,train_mse,val_mse\n";
    for (const auto& row : result.history) {
        f << row.epoch << ',' << fmt(row.train_mse) << ',' << fmt(row.val_mse) << "\n";
    }
}

void evaluate(const config::RunConfig& cfg, const std::string& data_dir,
              const std::string& weights_path, const std::string& out_dir,
              bool force_svg) {
    const json manifest = load_manifest(data_dir);
    const std::vector<sim::MissionRecord> missions =
        ingest_role(data_dir, manifest, "eval");
    const st::StWeights weights = st::load_weights(weights_path);

    eval::EvalParams params = config::eval_params(cfg);
    eval::SweepConfig sweep_cfg;
    sweep_cfg.durations = cfg.durations;
    sweep_cfg.n_starts = cfg.n_starts;
    sweep_cfg.seed = Rng(cfg.seed).fork(0xe7a1).seed();
    sweep_cfg.workers = cfg.workers;
    sweep_cfg.write_svg = cfg.write_svg || force_svg;
    sweep_cfg.svg_dir = out_dir + "/svg";

    const eval::SweepReport report = eval::sweep(missions, weights, params, sweep_cfg);
    fs::create_directories(out_dir);
    const std::string comment = artifact_comment(cfg, "report");
    eval::write_scenario_csv(report, out_dir + "/scenarios.csv", comment);
    eval::write_summary_csv(report, out_dir + "/summary.csv", comment);
}

void report(const std::string& scenario_csv, const std::string& out_summary_csv) {
    std::ifstream f(scenario_csv);
    if (!f) throw DataError("cannot open " + scenario_csv);
    std::string line, comment;
    bool header_seen = false;
    struct Key {
        std::string mission;
        double duration;
        bool operator<(const Key& o) const {
            return mission != o.mission ? mission < o.mission : duration < o.duration;
        }
    };
    struct Acc {
        eval::Metrics st, pure;
        long n_st = 0, n_pure = 0;
    };
    std::map<Key, Acc> cells;
    long line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (comment.empty()) comment = line.substr(1);
            continue;
        }
        if (!header_seen) {
            if (line != "mission,duration,start,method,vel_rmse,pos_rmse,afpe") {
                throw DataError(scenario_csv + ":" + std::to_string(line_no) +
                                ": unexpected header");
            }
            header_seen = true;
            continue;
        }
        std::stringstream ss(line);
        std::string mission, duration, start, method, vel, pos, fp;
        if (!std::getline(ss, mission, ',') || !std::getline(ss, duration, ',') ||
            !std::getline(ss, start, ',') || !std::getline(ss, method, ',') ||
            !std::getline(ss, vel, ',') || !std::getline(ss, pos, ',') ||
            !std::getline(ss, fp, ',')) {
            throw DataError(scenario_csv + ":" + std::to_string(line_no) +
                            ": expected 7 columns");
        }
        Key key{mission, std::stod(duration)};
        Acc& acc = cells[key];
        eval::Metrics m{std::stod(vel), std::stod(pos), std::stod(fp)};
        if (method == "st_aided_ekf") {
            acc.st.vel_rmse += m.vel_rmse;
            acc.st.pos_rmse += m.pos_rmse;
            acc.st.afpe += m.afpe;
            ++acc.n_st;
        } else if (method == "pure_ins") {
            acc.pure.vel_rmse += m.vel_rmse;
            acc.pure.pos_rmse += m.pos_rmse;
            acc.pure.afpe += m.afpe;
            ++acc.n_pure;
        }
    }
    if (!header_seen) throw DataError(scenario_csv + ": missing header");

    eval::SweepReport out;
    for (auto& [key, acc] : cells) {
        if (acc.n_st == 0 || acc.n_pure == 0) continue;
        eval::SummaryRow row;
        row.mission = key.mission;
        row.duration = key.duration;
        row.st_mean = {acc.st.vel_rmse / acc.n_st, acc.st.pos_rmse / acc.n_st,
                       acc.st.afpe / acc.n_st};
        row.pure_mean = {acc.pure.vel_rmse / acc.n_pure, acc.pure.pos_rmse / acc.n_pure,
                         acc.pure.afpe / acc.n_pure};
        const auto improvement = [](double base, double ours) {
            return base > 0.0 ? (base - ours) / base * 100.0 : 0.0;
        };
        row.vel_improvement_pct = improvement(row.pure_mean.vel_rmse, row.st_mean.vel_rmse);
        row.pos_improvement_pct = improvement(row.pure_mean.pos_rmse, row.st_mean.pos_rmse);
        row.afpe_improvement_pct = improvement(row.pure_mean.afpe, row.st_mean.afpe);
        out.summary.push_back(row);
    }
    eval::write_summary_csv(out, out_summary_csv, comment);
}

}  // namespace commands
}  // namespace stnav
