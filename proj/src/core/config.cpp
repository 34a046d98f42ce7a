#include "core/config.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "core/errors.hpp"

namespace stnav {
namespace config {

using nlohmann::json;

namespace {

constexpr double kDeg = M_PI / 180.0;

std::string kind_name(sim::TrajectorySpec::Kind k) {
    switch (k) {
        case sim::TrajectorySpec::Kind::Circle: return "circle";
        case sim::TrajectorySpec::Kind::FigureEight: return "figure_eight";
        case sim::TrajectorySpec::Kind::Lawnmower: return "lawnmower";
        case sim::TrajectorySpec::Kind::SplineWaypoints: return "spline_waypoints";
    }
    return "circle";
}

sim::TrajectorySpec::Kind kind_from_name(const std::string& name) {
    if (name == "circle") return sim::TrajectorySpec::Kind::Circle;
    if (name == "figure_eight") return sim::TrajectorySpec::Kind::FigureEight;
    if (name == "lawnmower") return sim::TrajectorySpec::Kind::Lawnmower;
    if (name == "spline_waypoints") return sim::TrajectorySpec::Kind::SplineWaypoints;
    throw UsageError("config: unknown trajectory kind '" + name + "'");
}

sim::TrajectorySpec traj_from_json(const json& j) {
    sim::TrajectorySpec s;
    s.name = j.value("name", s.name);
    s.kind = kind_from_name(j.value("kind", "circle"));
    s.duration_s = j.value("duration_s", s.duration_s);
    s.speed_mps = j.value("speed_mps", s.speed_mps);
    s.speed_amp_mps = j.value("speed_amp_mps", s.speed_amp_mps);
    s.speed_period_s = j.value("speed_period_s", s.speed_period_s);
    s.yaw0_rad = j.value("yaw0_deg", 0.0) * kDeg;
    s.yaw_rate_rps = j.value("yaw_rate_dps", s.yaw_rate_rps / kDeg) * kDeg;
    s.yaw_amp_rad = j.value("yaw_amp_deg", s.yaw_amp_rad / kDeg) * kDeg;
    s.yaw_period_s = j.value("yaw_period_s", s.yaw_period_s);
    s.pitch_amp_rad = j.value("pitch_amp_deg", 0.0) * kDeg;
    s.pitch_period_s = j.value("pitch_period_s", s.pitch_period_s);
    s.roll_amp_rad = j.value("roll_amp_deg", 0.0) * kDeg;
    s.roll_period_s = j.value("roll_period_s", s.roll_period_s);
    s.depth0_m = j.value("depth0_m", s.depth0_m);
    s.depth_amp_m = j.value("depth_amp_m", s.depth_amp_m);
    s.depth_period_s = j.value("depth_period_s", s.depth_period_s);
    if (j.contains("waypoints")) {
        for (const auto& wp : j.at("waypoints")) {
            s.waypoints.push_back({wp.at(0).get<double>(), wp.at(1).get<double>()});
        }
    }
    return s;
}

json traj_to_json(const sim::TrajectorySpec& s) {
    json j{{"name", s.name},
           {"kind", kind_name(s.kind)},
           {"duration_s", s.duration_s},
           {"speed_mps", s.speed_mps},
           {"speed_amp_mps", s.speed_amp_mps},
           {"speed_period_s", s.speed_period_s},
           {"yaw0_deg", s.yaw0_rad / kDeg},
           {"yaw_rate_dps", s.yaw_rate_rps / kDeg},
           {"yaw_amp_deg", s.yaw_amp_rad / kDeg},
           {"yaw_period_s", s.yaw_period_s},
           {"pitch_amp_deg", s.pitch_amp_rad / kDeg},
           {"pitch_period_s", s.pitch_period_s},
           {"roll_amp_deg", s.roll_amp_rad / kDeg},
           {"roll_period_s", s.roll_period_s},
           {"depth0_m", s.depth0_m},
           {"depth_amp_m", s.depth_amp_m},
           {"depth_period_s", s.depth_period_s}};
    if (!s.waypoints.empty()) {
        json wps = json::array();
        for (const auto& wp : s.waypoints) wps.push_back({wp[0], wp[1]});
        j["waypoints"] = wps;
    }
    return j;
}

// Deterministic mission parameter table; index seeds the variation.
sim::TrajectorySpec preset_mission(int index, double duration, const std::string& name) {
    sim::TrajectorySpec s;
    s.name = name;
    s.duration_s = duration;
    s.speed_mps = 1.3 + 0.08 * (index % 5);
    s.speed_amp_mps = 0.15 + 0.03 * (index % 3);
    s.speed_period_s = 40.0 + 6.0 * (index % 4);
    s.depth_amp_m = 1.0 + 0.4 * (index % 3);
    s.depth_period_s = 70.0 + 8.0 * (index % 4);
    s.pitch_amp_rad = (1.5 + 0.5 * (index % 3)) * kDeg;
    s.roll_amp_rad = (2.0 + 0.7 * (index % 3)) * kDeg;
    s.yaw0_rad = 0.35 * index;
    switch (index % 4) {
        case 0:
            s.kind = sim::TrajectorySpec::Kind::Circle;
            s.yaw_rate_rps = (2.5 + 0.5 * (index % 3)) * kDeg;
            break;
        case 1:
            s.kind = sim::TrajectorySpec::Kind::FigureEight;
            s.yaw_amp_rad = (65.0 + 8.0 * (index % 3)) * kDeg;
            s.yaw_period_s = 75.0 + 10.0 * (index % 3);
            break;
        case 2:
            s.kind = sim::TrajectorySpec::Kind::Lawnmower;
            s.yaw_amp_rad = 90.0 * kDeg;
            s.yaw_period_s = 90.0 + 12.0 * (index % 3);
            break;
        default: {
            s.kind = sim::TrajectorySpec::Kind::SplineWaypoints;
            // Gentle S-curve; spacing keeps the spline speed near 1.5 m/s.
            const double leg = 0.23 * duration;
            const double swing = 0.06 * duration * (1.0 + 0.2 * (index % 3));
            s.waypoints = {{0.0, 0.0},
                           {leg, swing},
                           {2.0 * leg, -0.6 * swing},
                           {3.0 * leg, swing},
                           {4.0 * leg, 0.0}};
            break;
        }
    }
    return s;
}

}  // namespace

std::vector<sim::TrajectorySpec> mission_preset(const std::string& name,
                                                bool eval_split) {
    std::vector<sim::TrajectorySpec> out;
    char buf[16];
    if (name == "toy") {
        if (!eval_split) {
            for (int i = 0; i < 4; ++i) {
                std::snprintf(buf, sizeof(buf), "T%02d", i + 1);
                out.push_back(preset_mission(i, 300.0, buf));
            }
        } else {
            for (int i = 0; i < 2; ++i) {
                std::snprintf(buf, sizeof(buf), "E%02d", i + 1);
                out.push_back(preset_mission(i + 4, 240.0, buf));
            }
        }
        return out;
    }
    if (name == "desk13") {
        if (!eval_split) {
            for (int i = 0; i < 11; ++i) {
                std::snprintf(buf, sizeof(buf), "M%02d", i + 1);
                out.push_back(preset_mission(i, 400.0, buf));
            }
        } else {
            for (int i = 11; i < 13; ++i) {
                std::snprintf(buf, sizeof(buf), "M%02d", i + 1);
                out.push_back(preset_mission(i, 410.0, buf));
            }
        }
        return out;
    }
    throw UsageError("config: unknown mission preset '" + name + "'");
}

RunConfig parse(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw UsageError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw UsageError("config: top level must be an object");

    RunConfig cfg;
    if (!doc.contains("seed")) {
        throw UsageError("config: 'seed' is mandatory");
    }
    cfg.seed = doc.at("seed").get<std::uint64_t>();
    cfg.out_dir = doc.value("out_dir", cfg.out_dir);
    cfg.imu_rate_hz = doc.value("imu_rate_hz", cfg.imu_rate_hz);

    const json missions = doc.value("missions", json::object());
    const std::string preset = missions.value("preset", "toy");
    if (missions.contains("train")) {
        for (const auto& t : missions.at("train")) cfg.train_missions.push_back(traj_from_json(t));
    } else {
        cfg.train_missions = mission_preset(preset, false);
    }
    if (missions.contains("eval")) {
        for (const auto& t : missions.at("eval")) cfg.eval_missions.push_back(traj_from_json(t));
    } else {
        cfg.eval_missions = mission_preset(preset, true);
    }

    const json imu = doc.value("imu", json::object());
    cfg.imu_noise.vrw_ug_sqrt_hz = imu.value("vrw_ug_sqrt_hz", 57.0);
    cfg.imu_noise.arw_deg_sqrt_hz = imu.value("arw_deg_sqrt_hz", 0.018);
    const auto bias_vec = [](const json& j, const char* key, Vec3 fallback, double unit) {
        if (!j.contains(key)) return fallback;
        const auto& a = j.at(key);
        return Vec3(a.at(0).get<double>() * unit, a.at(1).get<double>() * unit,
                    a.at(2).get<double>() * unit);
    };
    cfg.imu_noise.accel_bias = bias_vec(imu, "accel_bias_mg",
                                        Vec3(0.3, -0.5, 0.4) * 1e-3 * 9.80665,
                                        1e-3 * 9.80665);
    cfg.imu_noise.gyro_bias = bias_vec(imu, "gyro_bias_deg_h",
                                       Vec3(4.0, -6.0, 5.0) * kDeg / 3600.0,
                                       kDeg / 3600.0);

    const json dvlj = doc.value("dvl", json::object());
    cfg.dvl_theta_rad = dvlj.value("theta_deg", 20.0) * kDeg;
    const double scale = dvlj.value("scale", 0.007);
    const double bias = dvlj.value("bias_mps", 1e-4);
    cfg.dvl_err.scale = dvl::Vec4::Constant(scale);
    cfg.dvl_err.bias = dvl::Vec4::Constant(bias);
    cfg.dvl_err.noise_std = dvlj.value("noise_std_mps", 0.042);
    if (cfg.dvl_err.noise_std < 0.0) throw UsageError("config: dvl noise_std must be >= 0");

    const json stj = doc.value("st", json::object());
    cfg.st_preset = stj.value("preset", "toy");
    if (cfg.st_preset == "paper") cfg.st_hp = st::StHyperParams::paper_preset();
    else if (cfg.st_preset == "toy") cfg.st_hp = st::StHyperParams::toy_preset();
    else throw UsageError("config: st.preset must be 'paper' or 'toy'");
    cfg.st_hp.latent_dim = stj.value("latent_dim", cfg.st_hp.latent_dim);
    cfg.st_hp.sab_count = stj.value("sab_count", cfg.st_hp.sab_count);
    cfg.st_hp.heads = stj.value("heads", cfg.st_hp.heads);
    cfg.st_hp.ff_expansion = stj.value("ff_expansion", cfg.st_hp.ff_expansion);
    cfg.st_hp.pool_vectors = stj.value("pool_vectors", cfg.st_hp.pool_vectors);
    cfg.st_hp.dropout_p = stj.value("dropout_p", cfg.st_hp.dropout_p);
    cfg.st_hp.learning_rate = stj.value("learning_rate", cfg.st_hp.learning_rate);
    cfg.st_hp.momentum = stj.value("momentum", cfg.st_hp.momentum);
    cfg.st_hp.batch_size = stj.value("batch_size", cfg.st_hp.batch_size);
    cfg.st_hp.epochs = stj.value("epochs", cfg.st_hp.epochs);
    cfg.st_hp.validate();

    const json ekfj = doc.value("ekf", json::object());
    cfg.taylor_order = ekfj.value("taylor_order", 2);
    cfg.r_override = ekfj.value("r_override_mps", 0.0);
    cfg.r_inflation_predicted = ekfj.value("r_inflation_predicted", 1.0);
    cfg.bias_rw_fraction = ekfj.value("bias_rw_fraction", 1e-6);
    const json p0 = ekfj.value("p0", json::object());
    cfg.p0_vel = p0.value("vel_mps", 0.1);
    cfg.p0_att_rad = p0.value("att_deg", 0.5) * kDeg;
    cfg.p0_accel_bias = p0.value("accel_bias_mg", 1.0) * 1e-3 * 9.80665;
    cfg.p0_gyro_bias = p0.value("gyro_bias_deg_h", 10.0) * kDeg / 3600.0;

    const json sweep = doc.value("sweep", json::object());
    if (sweep.contains("durations")) {
        cfg.durations.clear();
        for (const auto& d : sweep.at("durations")) cfg.durations.push_back(d.get<double>());
    }
    cfg.n_starts = sweep.value("n_starts", 5);
    cfg.warmup_s = sweep.value("warmup_s", 60.0);
    cfg.guard_s = sweep.value("guard_s", 5.0);
    cfg.tail_s = sweep.value("tail_s", 10.0);
    cfg.workers = sweep.value("workers", 0);
    cfg.write_svg = sweep.value("svg", false);
    if (cfg.n_starts < 1) throw UsageError("config: sweep.n_starts must be >= 1");

    // Canonical resolved document (alphabetical keys, defaults applied).
    json resolved;
    resolved["seed"] = cfg.seed;
    resolved["out_dir"] = cfg.out_dir;
    resolved["imu_rate_hz"] = cfg.imu_rate_hz;
    json train = json::array(), eval_m = json::array();
    for (const auto& t : cfg.train_missions) train.push_back(traj_to_json(t));
    for (const auto& t : cfg.eval_missions) eval_m.push_back(traj_to_json(t));
    resolved["missions"] = {{"train", train}, {"eval", eval_m}};
    resolved["imu"] = {{"vrw_ug_sqrt_hz", cfg.imu_noise.vrw_ug_sqrt_hz},
                       {"arw_deg_sqrt_hz", cfg.imu_noise.arw_deg_sqrt_hz},
                       {"accel_bias_mps2", {cfg.imu_noise.accel_bias.x(),
                                            cfg.imu_noise.accel_bias.y(),
                                            cfg.imu_noise.accel_bias.z()}},
                       {"gyro_bias_rps", {cfg.imu_noise.gyro_bias.x(),
                                          cfg.imu_noise.gyro_bias.y(),
                                          cfg.imu_noise.gyro_bias.z()}}};
    resolved["dvl"] = {{"theta_deg", cfg.dvl_theta_rad / kDeg},
                       {"scale", cfg.dvl_err.scale(0)},
                       {"bias_mps", cfg.dvl_err.bias(0)},
                       {"noise_std_mps", cfg.dvl_err.noise_std}};
    resolved["st"] = {{"preset", cfg.st_preset},
                      {"latent_dim", cfg.st_hp.latent_dim},
                      {"sab_count", cfg.st_hp.sab_count},
                      {"heads", cfg.st_hp.heads},
                      {"ff_expansion", cfg.st_hp.ff_expansion},
                      {"pool_vectors", cfg.st_hp.pool_vectors},
                      {"dropout_p", cfg.st_hp.dropout_p},
                      {"learning_rate", cfg.st_hp.learning_rate},
                      {"momentum", cfg.st_hp.momentum},
                      {"batch_size", cfg.st_hp.batch_size},
                      {"epochs", cfg.st_hp.epochs}};
    resolved["ekf"] = {{"taylor_order", cfg.taylor_order},
                       {"r_override_mps", cfg.r_override},
                       {"r_inflation_predicted", cfg.r_inflation_predicted},
                       {"bias_rw_fraction", cfg.bias_rw_fraction},
                       {"p0",
                        {{"vel_mps", cfg.p0_vel},
                         {"att_deg", cfg.p0_att_rad / kDeg},
                         {"accel_bias_mps2", cfg.p0_accel_bias},
                         {"gyro_bias_rps", cfg.p0_gyro_bias}}}};
    resolved["sweep"] = {{"durations", cfg.durations},
                         {"n_starts", cfg.n_starts},
                         {"warmup_s", cfg.warmup_s},
                         {"guard_s", cfg.guard_s},
                         {"tail_s", cfg.tail_s},
                         {"workers", cfg.workers},
                         {"svg", cfg.write_svg}};
    cfg.resolved_json = resolved.dump(2);
    return cfg;
}

RunConfig load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw UsageError("config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
    return parse(text);
}

std::string hash_hex(const RunConfig& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : cfg.resolved_json) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

dvl::BeamGeometry beam_geometry(const RunConfig& cfg) {
    return dvl::beam_directions(cfg.dvl_theta_rad);
}

ekf::FilterParams filter_params(const RunConfig& cfg) {
    ekf::FilterParams fp;
    const double accel_density = cfg.imu_noise.vrw_ug_sqrt_hz * 9.80665e-6;
    const double gyro_density = cfg.imu_noise.arw_deg_sqrt_hz * kDeg;
    fp.noise.accel_psd = accel_density * accel_density;
    fp.noise.gyro_psd = gyro_density * gyro_density;
    const double ba_rw = cfg.bias_rw_fraction * cfg.p0_accel_bias;
    const double bg_rw = cfg.bias_rw_fraction * cfg.p0_gyro_bias;
    fp.noise.accel_bias_psd = ba_rw * ba_rw;
    fp.noise.gyro_bias_psd = bg_rw * bg_rw;

    if (cfg.r_override > 0.0) {
        fp.R = cfg.r_override * cfg.r_override * Mat3::Identity();
    } else {
        fp.R = ekf::dvl_measurement_noise(beam_geometry(cfg), cfg.dvl_err.noise_std);
    }
    fp.P0 = ekf::Mat12::Zero();
    fp.P0.block<3, 3>(0, 0) = cfg.p0_vel * cfg.p0_vel * Mat3::Identity();
    fp.P0.block<3, 3>(3, 3) = cfg.p0_att_rad * cfg.p0_att_rad * Mat3::Identity();
    fp.P0.block<3, 3>(6, 6) = cfg.p0_accel_bias * cfg.p0_accel_bias * Mat3::Identity();
    fp.P0.block<3, 3>(9, 9) = cfg.p0_gyro_bias * cfg.p0_gyro_bias * Mat3::Identity();
    fp.taylor_order = cfg.taylor_order;
    return fp;
}

eval::EvalParams eval_params(const RunConfig& cfg) {
    eval::EvalParams ep;
    ep.filter = filter_params(cfg);
    ep.geom = beam_geometry(cfg);
    ep.r_inflation_predicted = cfg.r_inflation_predicted;
    ep.warmup_s = cfg.warmup_s;
    ep.guard_s = cfg.guard_s;
    ep.tail_s = cfg.tail_s;
    return ep;
}

}  // namespace config
}  // namespace stnav
