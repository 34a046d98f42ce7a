// stnav command-line tool. Links the C API only; all functionality lives in
// the shared library.

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stnav/stnav.h"

namespace {

int status_to_exit(stnav_status s) { return static_cast<int>(s); }

int report_failure(stnav_status s, const char* what) {
    std::fprintf(stderr, "stnav %s failed: %s\n", what, stnav_last_error());
    return status_to_exit(s);
}

struct ConfigHandle {
    stnav_config* cfg = nullptr;
    ~ConfigHandle() { stnav_config_free(cfg); }
};

// Loads the config and applies the shared CLI overrides.
int load_config(const std::string& path, bool seed_set, std::uint64_t seed,
                const std::string& preset, int workers,
                const std::vector<double>& durations, ConfigHandle& out) {
    stnav_status s = stnav_config_load(path.c_str(), &out.cfg);
    if (s != STNAV_OK) return report_failure(s, "config");
    if (seed_set) {
        s = stnav_config_set_seed(out.cfg, seed);
        if (s != STNAV_OK) return report_failure(s, "config");
    }
    if (!preset.empty()) {
        s = stnav_config_override(out.cfg, "/st/preset", ("\"" + preset + "\"").c_str());
        if (s != STNAV_OK) return report_failure(s, "config");
    }
    if (workers >= 0) {
        s = stnav_config_override(out.cfg, "/sweep/workers", std::to_string(workers).c_str());
        if (s != STNAV_OK) return report_failure(s, "config");
    }
    if (!durations.empty()) {
        std::string arr = "[";
        for (std::size_t i = 0; i < durations.size(); ++i) {
            if (i) arr += ",";
            arr += std::to_string(durations[i]);
        }
        arr += "]";
        s = stnav_config_override(out.cfg, "/sweep/durations", arr.c_str());
        if (s != STNAV_OK) return report_failure(s, "config");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"INS/DVL sensor fusion with set-transformer outage bridging"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(stnav_version()));

    std::string config_path, out_dir, data_dir, weights_path;
    std::string scenario_csv, summary_csv, preset;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int workers = -1;
    bool svg = false;
    std::vector<double> durations;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        if (needs_config) {
            cmd->add_option("--config", config_path, "JSON configuration file")
                ->required()
                ->check(CLI::ExistingFile);
        }
        cmd->add_option("--seed", seed, "override the configured seed")
            ->each([&](const std::string&) { seed_set = true; });
        cmd->add_option("--preset", preset, "network preset: toy or paper");
        cmd->add_option("--workers", workers, "parallel scenario workers (0 = all cores)");
        cmd->add_option("--durations", durations, "outage durations in seconds");
    };

    CLI::App* sim = app.add_subcommand("simulate", "generate synthetic mission data");
    add_common(sim, true);
    sim->add_option("--out", out_dir, "output directory")->required();

    CLI::App* train = app.add_subcommand("train", "train the velocity predictor");
    add_common(train, true);
    train->add_option("--data", data_dir, "mission data directory")->required();
    train->add_option("--out", out_dir, "output directory")->required();

    CLI::App* eval = app.add_subcommand("evaluate", "run the outage sweep");
    add_common(eval, true);
    eval->add_option("--data", data_dir, "mission data directory")->required();
    eval->add_option("--weights", weights_path, "weights file")->required();
    eval->add_option("--out", out_dir, "output directory")->required();
    eval->add_flag("--svg", svg, "write North-East trajectory plots");

    CLI::App* report = app.add_subcommand("report", "summarize a scenario CSV");
    report->add_option("scenario_csv", scenario_csv, "per-scenario CSV")
        ->required()
        ->check(CLI::ExistingFile);
    report->add_option("out_csv", summary_csv, "summary CSV to write")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (report->parsed()) {
        const stnav_status s = stnav_report(scenario_csv.c_str(), summary_csv.c_str());
        if (s != STNAV_OK) return report_failure(s, "report");
        std::printf("wrote %s\n", summary_csv.c_str());
        return 0;
    }

    ConfigHandle cfg;
    if (int rc = load_config(config_path, seed_set, seed, preset, workers, durations, cfg);
        rc != 0) {
        return rc;
    }

    if (sim->parsed()) {
        const stnav_status s = stnav_simulate(cfg.cfg, out_dir.c_str());
        if (s != STNAV_OK) return report_failure(s, "simulate");
        std::printf("wrote missions + manifest under %s\n", out_dir.c_str());
    } else if (train->parsed()) {
        const stnav_status s = stnav_train(cfg.cfg, data_dir.c_str(), out_dir.c_str());
        if (s != STNAV_OK) return report_failure(s, "train");
        std::printf("wrote %s/weights.json and loss_history.csv\n", out_dir.c_str());
    } else if (eval->parsed()) {
        const stnav_status s = stnav_evaluate(cfg.cfg, data_dir.c_str(),
                                              weights_path.c_str(), out_dir.c_str(),
                                              svg ? 1 : 0);
        if (s != STNAV_OK) return report_failure(s, "evaluate");
        std::printf("wrote %s/scenarios.csv and summary.csv\n", out_dir.c_str());
    }
    return 0;
}
