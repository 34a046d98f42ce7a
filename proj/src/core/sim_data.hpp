#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "core/dvl.hpp"
#include "core/frames.hpp"
#include "core/set_transformer.hpp"
#include "core/strapdown.hpp"
#include "core/trajectory.hpp"

namespace stnav {
namespace sim {

// Analytic mission geometry. Heading, speed, depth, pitch and roll all
// follow smooth closed-form profiles so the trajectory is twice
// differentiable everywhere (spline waypoints are C2 cubics).
struct TrajectorySpec {
    enum class Kind { Circle, FigureEight, Lawnmower, SplineWaypoints };

    std::string name = "M01";
    Kind kind = Kind::Circle;
    double duration_s = 300.0;

    double speed_mps = 1.5;
    double speed_amp_mps = 0.0;
    double speed_period_s = 60.0;

    double yaw0_rad = 0.0;
    double yaw_rate_rps = 0.05;    // circle
    double yaw_amp_rad = 1.2;      // figure-eight / lawnmower swing
    double yaw_period_s = 80.0;

    double pitch_amp_rad = 0.0;
    double pitch_period_s = 45.0;
    double roll_amp_rad = 0.0;
    double roll_period_s = 37.0;

    double depth0_m = 10.0;
    double depth_amp_m = 0.0;
    double depth_period_s = 90.0;

    std::vector<std::array<double, 2>> waypoints;  // spline kind, north/east [m]
};

std::unique_ptr<Trajectory> make_trajectory(const TrajectorySpec& spec);

struct ImuNoiseParams {
    double vrw_ug_sqrt_hz = 57.0;      // accelerometer white noise density
    double arw_deg_sqrt_hz = 0.018;    // gyroscope white noise density
    Vec3 accel_bias = Vec3::Zero();    // [m/s^2]
    Vec3 gyro_bias = Vec3::Zero();     // [rad/s]
    std::uint64_t seed = 0;
};

// Table-to-SI conversions for the white-noise densities.
double accel_noise_std(double vrw_ug_sqrt_hz, double rate_hz);   // [m/s^2]
double gyro_noise_std(double arw_deg_sqrt_hz, double rate_hz);   // [rad/s]

struct MissionRecord {
    std::string name;
    double imu_rate_hz = 100.0;
    double dvl_rate_hz = 1.0;
    std::vector<ins::ImuSample> imu;                // t = k / imu_rate
    std::vector<dvl::DvlMeasurement> dvl;           // integer epochs 1..T
    std::vector<ins::NavState> ground_truth;        // t = k / imu_rate, incl. endpoint
};

// Ground truth from analytic kinematics, ideal IMU via inverse
// mechanization, noise per the configured densities plus constant biases,
// DVL beams synthesized from ground-truth body velocity then LS-solved.
MissionRecord generate_mission(const TrajectorySpec& spec,
                               const ImuNoiseParams& noise,
                               const dvl::DvlErrorParams& dvl_err,
                               const dvl::BeamGeometry& geom,
                               double imu_rate_hz = 100.0);

enum class WindowMode { Disjoint, Strided };

// Supervised windows: 3 past DVL velocities + the 4 s IMU window ending at
// the withheld DVL epoch. Windows overlapping invalid DVL epochs are
// dropped.
std::vector<st::TrainingWindow> build_windows(const MissionRecord& mission,
                                              WindowMode mode = WindowMode::Disjoint);

// CSV export/ingest. Files carry an optional leading '#' comment line, then
// the exact schema header.
void export_mission(const MissionRecord& mission, const std::string& dir,
                    const std::string& comment);
MissionRecord ingest_external(const std::string& imu_path,
                              const std::string& dvl_path,
                              const std::string& gt_path);

}  // namespace sim
}  // namespace stnav
