#pragma once

#include <Eigen/Dense>

#include "core/dvl.hpp"
#include "core/frames.hpp"
#include "core/strapdown.hpp"

namespace stnav {
namespace ekf {

using Mat12 = Eigen::Matrix<double, 12, 12>;
using Vec12 = Eigen::Matrix<double, 12, 1>;
using Mat3x12 = Eigen::Matrix<double, 3, 12>;

// Error state dx = [dv_n, eps_n, db_a, db_g], defined as truth minus
// estimate: v_true = v_est + dv, C_true = (I - skew(eps)) C_est,
// b_true = b_est + db. This convention makes the DVL measurement matrix
// come out as H = [C_n^b, -C_n^b skew(v^n), 0, 0].
struct ErrorState {
    Vec3 dv = Vec3::Zero();
    Vec3 eps = Vec3::Zero();
    Vec3 db_a = Vec3::Zero();
    Vec3 db_g = Vec3::Zero();

    Vec12 to_vector() const;
    static ErrorState from_vector(const Vec12& x);
};

// Continuous-time process noise densities. vrw/arw are the white-noise
// channels feeding dv/eps; the bias channels are random walks.
struct ProcessNoise {
    double accel_psd = 0.0;       // [(m/s^2)^2 / Hz]
    double gyro_psd = 0.0;        // [(rad/s)^2 / Hz]
    double accel_bias_psd = 0.0;  // [(m/s^2)^2 / Hz]
    double gyro_bias_psd = 0.0;   // [(rad/s)^2 / Hz]

    Mat12 matrix() const;  // diagonal PSD matrix
};

// Error dynamics Jacobian. Nonzero blocks: dv/eps (specific-force cross
// coupling), dv/db_a, eps/db_g; bias rows are zero.
Mat12 assemble_F(const ins::NavState& state, const ins::ImuSample& imu);

// Noise shaping matrix: w_a enters dv through C_bn, w_g enters eps through
// -C_bn, bias random walks map one-to-one.
Mat12 assemble_G(const ins::NavState& state);

// Truncated Taylor series of exp(F * tau_s).
Mat12 transition_matrix(const Mat12& F, double tau_s, int order);

// Mid-point discretization 0.5 * (Phi G Q G^T + G Q G^T Phi^T) * dt.
Mat12 discretize_Q(const Mat12& Phi, const Mat12& G, const Mat12& Q,
                   double dt);

// Covariance propagation Phi P Phi^T + Q_k, symmetrized.
Mat12 predict(const Mat12& P, const Mat12& Phi, const Mat12& Q_k);

// DVL measurement matrix [C_n^b, -C_n^b skew(v^n), 0, 0].
Mat3x12 assemble_H(const ins::NavState& state);

// Kalman update for innovation dz = v_meas_body - C_n^b v_est_n. Returns
// the estimated error state and the posterior covariance. Throws
// NumericError when the innovation covariance is not invertible.
std::pair<ErrorState, Mat12> update(const Mat12& P, const Mat3x12& H,
                                    const Mat3& R, const Vec3& dz);

// Applies the estimated error to the navigation state and implicitly
// resets dx to zero.
ins::NavState feedback(const ins::NavState& state, const ErrorState& dx);

struct FilterParams {
    ProcessNoise noise;
    Mat3 R = Mat3::Identity();   // DVL measurement noise [(m/s)^2]
    Mat12 P0 = Mat12::Identity();
    int taylor_order = 2;
    Vec3 g_n = ins::kGravityNed;
};

// Default initial covariance: velocity (0.1 m/s)^2, attitude (0.5 deg)^2,
// accel bias (1 mg)^2, gyro bias (10 deg/h)^2.
Mat12 default_p0();

// Measurement noise implied by the beam noise through the LS solve:
// R = noise_std^2 (A^T A)^-1.
Mat3 dvl_measurement_noise(const dvl::BeamGeometry& geom, double noise_std);

// INS/DVL error-state filter: mechanization plus covariance propagation at
// the IMU rate, velocity updates at the DVL rate.
class Filter {
public:
    Filter(const ins::NavState& initial, const FilterParams& params)
        : state_(initial), P_(params.P0), params_(params) {}

    const ins::NavState& state() const { return state_; }
    const Mat12& covariance() const { return P_; }

    void propagate(const ins::ImuSample& imu, double dt);

    // DVL (or surrogate) body-velocity update. r_scale inflates R, e.g.
    // for network-predicted measurements. Returns the innovation.
    Vec3 update_velocity(const Vec3& v_body_meas, double r_scale = 1.0);

private:
    ins::NavState state_;
    Mat12 P_;
    FilterParams params_;
};

}  // namespace ekf
}  // namespace stnav
