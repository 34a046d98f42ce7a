#include "core/sim_data.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "core/errors.hpp"

namespace stnav {
namespace sim {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

struct Profile {
    double base = 0.0, amp = 0.0, omega = 0.0;
    double value(double t) const { return base + amp * std::sin(omega * t); }
    double deriv(double t) const { return amp * omega * std::cos(omega * t); }
    double deriv2(double t) const { return -amp * omega * omega * std::sin(omega * t); }
};

Profile make_profile(double base, double amp, double period) {
    Profile p;
    p.base = base;
    p.amp = amp;
    p.omega = (period > 0.0) ? kTwoPi / period : 0.0;
    return p;
}

// Heading profiles per trajectory kind, with analytic first derivative.
struct Heading {
    TrajectorySpec::Kind kind;
    double yaw0 = 0.0, rate = 0.0, amp = 0.0, omega = 0.0;
    static constexpr double kSquareness = 3.0;  // lawnmower smoothing gain

    double value(double t) const {
        switch (kind) {
            case TrajectorySpec::Kind::Circle:
                return yaw0 + rate * t;
            case TrajectorySpec::Kind::FigureEight:
                return yaw0 + amp * std::sin(omega * t);
            case TrajectorySpec::Kind::Lawnmower:
                return yaw0 + amp * std::tanh(kSquareness * std::sin(omega * t)) /
                                  std::tanh(kSquareness);
            default:
                return yaw0;
        }
    }
    double deriv(double t) const {
        switch (kind) {
            case TrajectorySpec::Kind::Circle:
                return rate;
            case TrajectorySpec::Kind::FigureEight:
                return amp * omega * std::cos(omega * t);
            case TrajectorySpec::Kind::Lawnmower: {
                const double s = std::sin(omega * t);
                const double sech = 1.0 / std::cosh(kSquareness * s);
                return amp * kSquareness * omega * std::cos(omega * t) * sech * sech /
                       std::tanh(kSquareness);
            }
            default:
                return 0.0;
        }
    }
};

// Body angular rate from ZYX Euler angles and their rates.
Vec3 body_rate_from_euler(double roll, double pitch, double droll,
                          double dpitch, double dyaw) {
    const double sr = std::sin(roll), cr = std::cos(roll);
    const double sp = std::sin(pitch), cp = std::cos(pitch);
    return Vec3(droll - dyaw * sp,
                dpitch * cr + dyaw * cp * sr,
                dyaw * cp * cr - dpitch * sr);
}

class ParametricTrajectory final : public Trajectory {
public:
    explicit ParametricTrajectory(const TrajectorySpec& spec)
        : duration_(spec.duration_s),
          speed_(make_profile(spec.speed_mps, spec.speed_amp_mps, spec.speed_period_s)),
          pitch_(make_profile(0.0, spec.pitch_amp_rad, spec.pitch_period_s)),
          roll_(make_profile(0.0, spec.roll_amp_rad, spec.roll_period_s)),
          depth_(make_profile(spec.depth0_m, spec.depth_amp_m, spec.depth_period_s)) {
        heading_.kind = spec.kind;
        heading_.yaw0 = spec.yaw0_rad;
        heading_.rate = spec.yaw_rate_rps;
        heading_.amp = spec.yaw_amp_rad;
        heading_.omega = (spec.yaw_period_s > 0.0) ? kTwoPi / spec.yaw_period_s : 0.0;
    }

    double duration() const override { return duration_; }

    TrajectorySample sample(double t) const override {
        const double s = speed_.value(t), ds = speed_.deriv(t);
        const double psi = heading_.value(t), dpsi = heading_.deriv(t);
        const double th = pitch_.value(t), dth = pitch_.deriv(t);
        const double ph = roll_.value(t), dph = roll_.deriv(t);
        const double cpsi = std::cos(psi), spsi = std::sin(psi);

        TrajectorySample out;
        out.v_n = Vec3(s * cpsi, s * spsi, depth_.deriv(t));
        out.a_n = Vec3(ds * cpsi - s * dpsi * spsi,
                       ds * spsi + s * dpsi * cpsi,
                       depth_.deriv2(t));
        out.C_bn = frames::rotation_from_euler(ph, th, psi);
        out.omega_b = body_rate_from_euler(ph, th, dph, dth, dpsi);
        return out;
    }

private:
    double duration_;
    Profile speed_, pitch_, roll_, depth_;
    Heading heading_;
};

// Natural cubic spline through uniform knots on [0, duration].
class Spline1d {
public:
    Spline1d() = default;
    Spline1d(std::vector<double> y, double duration) : y_(std::move(y)), h_(0.0) {
        const std::size_t n = y_.size();
        h_ = duration / static_cast<double>(n - 1);
        m_.assign(n, 0.0);
        if (n < 3) return;
        // Tridiagonal solve for interior second derivatives (natural ends).
        std::vector<double> diag(n - 2, 4.0), rhs(n - 2), c(n - 2, 1.0);
        for (std::size_t i = 0; i < n - 2; ++i)
            rhs[i] = 6.0 / (h_ * h_) * (y_[i] - 2.0 * y_[i + 1] + y_[i + 2]);
        for (std::size_t i = 1; i < n - 2; ++i) {
            const double w = c[i] / diag[i - 1];
            diag[i] -= w * c[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        m_[n - 2] = rhs[n - 3] / diag[n - 3];
        for (std::size_t i = n - 3; i >= 1; --i) {
            m_[i] = (rhs[i - 1] - c[i - 1] * m_[i + 1]) / diag[i - 1];
            if (i == 1) break;
        }
    }

    void eval(double t, double& y, double& dy, double& d2y) const {
        const std::size_t n = y_.size();
        double u = t / h_;
        auto i = static_cast<std::size_t>(std::max(0.0, std::min(u, static_cast<double>(n - 2))));
        if (i > n - 2) i = n - 2;
        const double a = t - static_cast<double>(i) * h_;
        const double b = h_ - a;
        const double mi = m_[i], mj = m_[i + 1];
        y = (mi * b * b * b + mj * a * a * a) / (6.0 * h_) +
            (y_[i] / h_ - mi * h_ / 6.0) * b + (y_[i + 1] / h_ - mj * h_ / 6.0) * a;
        dy = (-mi * b * b + mj * a * a) / (2.0 * h_) +
             (y_[i + 1] - y_[i]) / h_ - (mj - mi) * h_ / 6.0;
        d2y = (mi * b + mj * a) / h_;
    }

private:
    std::vector<double> y_;
    std::vector<double> m_;  // second derivatives at knots
    double h_ = 0.0;
};

class SplineTrajectory final : public Trajectory {
public:
    SplineTrajectory(const TrajectorySpec& spec)
        : duration_(spec.duration_s),
          depth_(make_profile(spec.depth0_m, spec.depth_amp_m, spec.depth_period_s)) {
        std::vector<double> xs, ys;
        for (const auto& wp : spec.waypoints) {
            xs.push_back(wp[0]);
            ys.push_back(wp[1]);
        }
        north_ = Spline1d(std::move(xs), duration_);
        east_ = Spline1d(std::move(ys), duration_);
    }

    double duration() const override { return duration_; }

    TrajectorySample sample(double t) const override {
        double x, dx, d2x, y, dy, d2y;
        north_.eval(t, x, dx, d2x);
        east_.eval(t, y, dy, d2y);
        const double v2 = dx * dx + dy * dy;
        if (v2 < 1e-12) {
            throw DataError("spline trajectory: speed vanishes at t=" + std::to_string(t));
        }
        TrajectorySample out;
        out.v_n = Vec3(dx, dy, depth_.deriv(t));
        out.a_n = Vec3(d2x, d2y, depth_.deriv2(t));
        const double psi = std::atan2(dy, dx);
        const double dpsi = (dx * d2y - dy * d2x) / v2;
        out.C_bn = frames::rotation_from_euler(0.0, 0.0, psi);
        out.omega_b = body_rate_from_euler(0.0, 0.0, 0.0, 0.0, dpsi);
        return out;
    }

private:
    double duration_;
    Spline1d north_, east_;
    Profile depth_;
};

}  // namespace

std::unique_ptr<Trajectory> make_trajectory(const TrajectorySpec& spec) {
    if (!(spec.duration_s > 0.0)) {
        throw DataError("trajectory: duration must be positive");
    }
    if (spec.kind == TrajectorySpec::Kind::SplineWaypoints) {
        if (spec.waypoints.size() < 3) {
            throw DataError("trajectory: spline kind needs at least 3 waypoints");
        }
        return std::make_unique<SplineTrajectory>(spec);
    }
    if (spec.speed_mps - std::abs(spec.speed_amp_mps) <= 0.0) {
        throw DataError("trajectory: speed profile must stay positive");
    }
    if ((spec.speed_amp_mps != 0.0 && spec.speed_period_s <= 0.0) ||
        (spec.pitch_amp_rad != 0.0 && spec.pitch_period_s <= 0.0) ||
        (spec.roll_amp_rad != 0.0 && spec.roll_period_s <= 0.0) ||
        (spec.depth_amp_m != 0.0 && spec.depth_period_s <= 0.0)) {
        throw DataError("trajectory: oscillating profile needs a positive period");
    }
    return std::make_unique<ParametricTrajectory>(spec);
}

double accel_noise_std(double vrw_ug_sqrt_hz, double rate_hz) {
    return vrw_ug_sqrt_hz * 9.80665e-6 * std::sqrt(rate_hz);
}

double gyro_noise_std(double arw_deg_sqrt_hz, double rate_hz) {
    return arw_deg_sqrt_hz * (M_PI / 180.0) * std::sqrt(rate_hz);
}

MissionRecord generate_mission(const TrajectorySpec& spec,
                               const ImuNoiseParams& noise,
                               const dvl::DvlErrorParams& dvl_err,
                               const dvl::BeamGeometry& geom,
                               double imu_rate_hz) {
    auto traj = make_trajectory(spec);
    const double dt = 1.0 / imu_rate_hz;

    MissionRecord rec;
    rec.name = spec.name;
    rec.imu_rate_hz = imu_rate_hz;
    rec.imu = ins::inverse_mechanize(*traj, dt);

    // Ground truth at every IMU epoch plus the endpoint; position by
    // trapezoidal integration of the analytic velocity.
    const std::size_t n = rec.imu.size();
    rec.ground_truth.reserve(n + 1);
    Vec3 p = Vec3::Zero();
    Vec3 v_prev = Vec3::Zero();
    for (std::size_t k = 0; k <= n; ++k) {
        const double t = static_cast<double>(k) * dt;
        const TrajectorySample s = traj->sample(t);
        if (k > 0) p += 0.5 * (v_prev + s.v_n) * dt;
        v_prev = s.v_n;
        ins::NavState gt;
        gt.t = t;
        gt.v_n = s.v_n;
        gt.C_bn = s.C_bn;
        gt.p_n = p;
        gt.b_a = noise.accel_bias;
        gt.b_g = noise.gyro_bias;
        rec.ground_truth.push_back(gt);
    }

    Rng rng(noise.seed);
    Rng imu_rng = rng.fork(1);
    Rng dvl_rng = rng.fork(2);
    const double astd = accel_noise_std(noise.vrw_ug_sqrt_hz, imu_rate_hz);
    const double gstd = gyro_noise_std(noise.arw_deg_sqrt_hz, imu_rate_hz);
    for (auto& s : rec.imu) {
        for (int i = 0; i < 3; ++i) {
            s.f_b(i) += noise.accel_bias(i) + imu_rng.gaussian(0.0, astd);
            s.omega_b(i) += noise.gyro_bias(i) + imu_rng.gaussian(0.0, gstd);
        }
    }

    const auto last_epoch = static_cast<long>(std::floor(spec.duration_s + 1e-9));
    for (long e = 1; e <= last_epoch; ++e) {
        const TrajectorySample s = traj->sample(static_cast<double>(e));
        const Vec3 v_body = s.C_bn.transpose() * s.v_n;
        dvl::DvlMeasurement m;
        m.t = static_cast<double>(e);
        m.beams = dvl::synthesize_beams(v_body, geom, dvl_err, dvl_rng);
        m.body_velocity = dvl::ls_solve(m.beams, geom);
        m.valid = true;
        rec.dvl.push_back(m);
    }
    return rec;
}

std::vector<st::TrainingWindow> build_windows(const MissionRecord& mission,
                                              WindowMode mode) {
    const long n_dvl = static_cast<long>(mission.dvl.size());
    if (n_dvl < 4) throw DataError("build_windows: mission shorter than 4 s");
    const long rate = static_cast<long>(std::llround(mission.imu_rate_hz));
    const long window = 4 * rate;
    const long hop = (mode == WindowMode::Disjoint) ? 4 : 1;

    std::vector<st::TrainingWindow> out;
    for (long target = 4; target <= n_dvl; target += hop) {
        // DVL epochs target-3 .. target (indices are epoch-1).
        bool ok = true;
        for (long e = target - 3; e <= target; ++e)
            ok = ok && mission.dvl[static_cast<std::size_t>(e - 1)].valid;
        const long end_idx = target * rate;
        const long begin_idx = end_idx - window;
        if (begin_idx < 0 || end_idx > static_cast<long>(mission.imu.size())) ok = false;
        if (!ok) continue;

        st::TrainingWindow win;
        std::vector<double> dvl_data;
        dvl_data.reserve(9);
        for (long e = target - 3; e <= target - 1; ++e) {
            const Vec3& v = mission.dvl[static_cast<std::size_t>(e - 1)].body_velocity;
            dvl_data.insert(dvl_data.end(), {v.x(), v.y(), v.z()});
        }
        win.dvl_past = ad::Tensor::from_data({3, 3}, std::move(dvl_data));
        std::vector<double> imu_data;
        imu_data.reserve(static_cast<std::size_t>(window) * 6);
        for (long i = begin_idx; i < end_idx; ++i) {
            const auto& s = mission.imu[static_cast<std::size_t>(i)];
            for (int c = 0; c < 3; ++c) imu_data.push_back(s.f_b(c));
            for (int c = 0; c < 3; ++c) imu_data.push_back(s.omega_b(c));
        }
        win.imu_past = ad::Tensor::from_data({window, 6}, std::move(imu_data));
        win.target = mission.dvl[static_cast<std::size_t>(target - 1)].body_velocity;
        win.t_target = static_cast<double>(target);
        out.push_back(std::move(win));
    }
    if (out.empty()) throw DataError("build_windows: no complete windows");
    return out;
}

// --- CSV -------------------------------------------------------------------

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct CsvReader {
    std::ifstream file;
    std::string path;
    long line_no = 0;

    CsvReader(const std::string& p) : file(p), path(p) {
        if (!file) throw DataError("cannot open " + p);
    }

    // Returns false at EOF. Skips '#' comment lines.
    bool next(std::vector<std::string>& fields) {
        std::string line;
        while (std::getline(file, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line[0] == '#') continue;
            fields.clear();
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ',')) fields.push_back(cell);
            if (!line.empty() && line.back() == ',') fields.push_back("");
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw DataError(path + ":" + std::to_string(line_no) + ": " + msg);
    }

    double num(const std::string& cell) const {
        if (cell.empty()) fail("empty numeric field");
        char* end = nullptr;
        const double v = std::strtod(cell.c_str(), &end);
        if (end == cell.c_str() || *end != '\0') fail("malformed number '" + cell + "'");
        return v;
    }
};

void expect_header(CsvReader& r, const std::string& expected) {
    std::vector<std::string> fields;
    if (!r.next(fields)) r.fail("missing header row");
    std::string joined;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) joined += ",";
        joined += fields[i];
    }
    if (joined != expected) {
        r.fail("header mismatch: expected '" + expected + "', got '" + joined + "'");
    }
}

}  // namespace

void export_mission(const MissionRecord& mission, const std::string& dir,
                    const std::string& comment) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const std::string base = dir + "/" + mission.name;

    {
        std::ofstream f(base + ".imu.csv");
        if (!f) throw DataError("cannot write " + base + ".imu.csv");
        if (!comment.empty()) f << "# " << comment << "\n";
        f << "t,fx,fy,fz,wx,wy,wz\n";
        for (const auto& s : mission.imu) {
            f << fmt(s.t) << ',' << fmt(s.f_b.x()) << ',' << fmt(s.f_b.y()) << ','
              << fmt(s.f_b.z()) << ',' << fmt(s.omega_b.x()) << ','
              << fmt(s.omega_b.y()) << ',' << fmt(s.omega_b.z()) << "\n";
        }
    }
    {
        std::ofstream f(base + ".dvl.csv");
        if (!f) throw DataError("cannot write " + base + ".dvl.csv");
        if (!comment.empty()) f << "# " << comment << "\n";
        f << "t,b1,b2,b3,b4,vx,vy,vz,valid\n";
        for (const auto& m : mission.dvl) {
            f << fmt(m.t);
            for (int i = 0; i < 4; ++i) f << ',' << fmt(m.beams(i));
            for (int i = 0; i < 3; ++i) f << ',' << fmt(m.body_velocity(i));
            f << ',' << (m.valid ? 1 : 0) << "\n";
        }
    }
    {
        std::ofstream f(base + ".gt.csv");
        if (!f) throw DataError("cannot write " + base + ".gt.csv");
        if (!comment.empty()) f << "# " << comment << "\n";
        f << "t,vn,ve,vd,roll,pitch,yaw,pn,pe,pd\n";
        for (const auto& g : mission.ground_truth) {
            double roll, pitch, yaw;
            frames::euler_from_rotation(g.C_bn, roll, pitch, yaw);
            f << fmt(g.t) << ',' << fmt(g.v_n.x()) << ',' << fmt(g.v_n.y()) << ','
              << fmt(g.v_n.z()) << ',' << fmt(roll) << ',' << fmt(pitch) << ','
              << fmt(yaw) << ',' << fmt(g.p_n.x()) << ',' << fmt(g.p_n.y()) << ','
              << fmt(g.p_n.z()) << "\n";
        }
    }
}

MissionRecord ingest_external(const std::string& imu_path,
                              const std::string& dvl_path,
                              const std::string& gt_path) {
    MissionRecord rec;
    rec.name = std::filesystem::path(imu_path).stem().stem().string();

    {
        CsvReader r(imu_path);
        expect_header(r, "t,fx,fy,fz,wx,wy,wz");
        std::vector<std::string> f;
        double prev_t = 0.0, dt0 = 0.0;
        while (r.next(f)) {
            if (f.size() != 7) r.fail("expected 7 columns, got " + std::to_string(f.size()));
            ins::ImuSample s;
            s.t = r.num(f[0]);
            s.f_b = Vec3(r.num(f[1]), r.num(f[2]), r.num(f[3]));
            s.omega_b = Vec3(r.num(f[4]), r.num(f[5]), r.num(f[6]));
            if (!rec.imu.empty()) {
                const double dt = s.t - prev_t;
                if (dt <= 0.0) r.fail("non-monotonic timestamp");
                if (dt0 == 0.0) dt0 = dt;
                else if (std::abs(dt - dt0) > 0.01 * dt0) r.fail("sample rate deviates by more than 1%");
            }
            prev_t = s.t;
            rec.imu.push_back(s);
        }
        if (rec.imu.size() < 2) r.fail("IMU stream too short");
        rec.imu_rate_hz = 1.0 / dt0;
    }
    {
        CsvReader r(dvl_path);
        expect_header(r, "t,b1,b2,b3,b4,vx,vy,vz,valid");
        std::vector<std::string> f;
        double prev_t = -1.0;
        while (r.next(f)) {
            if (f.size() != 9) r.fail("expected 9 columns, got " + std::to_string(f.size()));
            dvl::DvlMeasurement m;
            m.t = r.num(f[0]);
            for (int i = 0; i < 4; ++i)
                m.beams(i) = f[static_cast<std::size_t>(1 + i)].empty()
                                 ? 0.0
                                 : r.num(f[static_cast<std::size_t>(1 + i)]);
            m.body_velocity = Vec3(r.num(f[5]), r.num(f[6]), r.num(f[7]));
            const double valid = r.num(f[8]);
            m.valid = valid != 0.0;
            if (!rec.dvl.empty() && m.t <= prev_t) r.fail("non-monotonic timestamp");
            prev_t = m.t;
            rec.dvl.push_back(m);
        }
    }
    {
        CsvReader r(gt_path);
        expect_header(r, "t,vn,ve,vd,roll,pitch,yaw,pn,pe,pd");
        std::vector<std::string> f;
        double prev_t = 0.0;
        while (r.next(f)) {
            if (f.size() != 10) r.fail("expected 10 columns, got " + std::to_string(f.size()));
            ins::NavState g;
            g.t = r.num(f[0]);
            g.v_n = Vec3(r.num(f[1]), r.num(f[2]), r.num(f[3]));
            g.C_bn = frames::rotation_from_euler(r.num(f[4]), r.num(f[5]), r.num(f[6]));
            g.p_n = Vec3(r.num(f[7]), r.num(f[8]), r.num(f[9]));
            if (!rec.ground_truth.empty() && g.t <= prev_t) r.fail("non-monotonic timestamp");
            prev_t = g.t;
            rec.ground_truth.push_back(g);
        }
        if (rec.ground_truth.size() != rec.imu.size() + 1) {
            r.fail("ground truth must cover every IMU epoch plus the endpoint");
        }
    }
    // DVL epochs must land on IMU epochs.
    for (const auto& m : rec.dvl) {
        const double idx = m.t * rec.imu_rate_hz;
        if (std::abs(idx - std::round(idx)) > 1e-6 ||
            m.t > rec.ground_truth.back().t + 1e-9) {
            throw DataError(dvl_path + ": DVL epoch t=" + std::to_string(m.t) +
                            " not aligned with the IMU grid");
        }
    }
    return rec;
}

}  // namespace sim
}  // namespace stnav
