#pragma once

#include <vector>

#include "core/frames.hpp"
#include "core/trajectory.hpp"

namespace stnav {
namespace ins {

// Standard gravity, NED down-positive.
inline const Vec3 kGravityNed{0.0, 0.0, 9.80665};

// One inertial sample covering [t, t + dt). f_b and omega_b hold the
// interval-average specific force and angular rate.
struct ImuSample {
    double t = 0.0;       // [s]
    Vec3 f_b = Vec3::Zero();      // specific force [m/s^2]
    Vec3 omega_b = Vec3::Zero();  // angular rate [rad/s]
};

struct NavState {
    double t = 0.0;
    Vec3 v_n = Vec3::Zero();      // NED velocity [m/s]
    Rotation C_bn = Rotation::Identity();
    Vec3 p_n = Vec3::Zero();      // integrated NED position [m]
    Vec3 b_a = Vec3::Zero();      // accelerometer bias [m/s^2]
    Vec3 b_g = Vec3::Zero();      // gyroscope bias [rad/s]
};

// Local-level strapdown update over one IMU interval. Attitude advances by
// the closed-form Rodrigues rotation of (omega - b_g) * dt; the velocity
// increment rotates through the mid-interval attitude; position integrates
// velocity trapezoidally. Earth rate and transport rate are neglected.
NavState mechanize_step(const NavState& state, const ImuSample& imu, double dt,
                        const Vec3& g_n = kGravityNed);

// Ideal (noiseless, bias-free) IMU stream reproducing the trajectory under
// mechanize_step. Samples are interval averages taken at interval midpoints.
std::vector<ImuSample> inverse_mechanize(const Trajectory& traj, double dt,
                                         const Vec3& g_n = kGravityNed);

}  // namespace ins
}  // namespace stnav
