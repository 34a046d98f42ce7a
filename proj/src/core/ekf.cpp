#include "core/ekf.hpp"

#include <cmath>

#include "core/errors.hpp"

namespace stnav {
namespace ekf {

Vec12 ErrorState::to_vector() const {
    Vec12 x;
    x.segment<3>(0) = dv;
    x.segment<3>(3) = eps;
    x.segment<3>(6) = db_a;
    x.segment<3>(9) = db_g;
    return x;
}

ErrorState ErrorState::from_vector(const Vec12& x) {
    ErrorState e;
    e.dv = x.segment<3>(0);
    e.eps = x.segment<3>(3);
    e.db_a = x.segment<3>(6);
    e.db_g = x.segment<3>(9);
    return e;
}

Mat12 ProcessNoise::matrix() const {
    Mat12 Q = Mat12::Zero();
    Q.block<3, 3>(0, 0) = accel_psd * Mat3::Identity();
    Q.block<3, 3>(3, 3) = gyro_psd * Mat3::Identity();
    Q.block<3, 3>(6, 6) = accel_bias_psd * Mat3::Identity();
    Q.block<3, 3>(9, 9) = gyro_bias_psd * Mat3::Identity();
    return Q;
}

Mat12 assemble_F(const ins::NavState& state, const ins::ImuSample& imu) {
    Mat12 F = Mat12::Zero();
    const Vec3 f_n = state.C_bn * (imu.f_b - state.b_a);
    // dv_dot = skew(C f) eps - C db_a;  eps_dot = C db_g. Signs follow from
    // the truth-minus-estimate error definition with the nav-frame
    // attitude error on the left of C.
    F.block<3, 3>(0, 3) = frames::skew(f_n);
    F.block<3, 3>(0, 6) = -state.C_bn;
    F.block<3, 3>(3, 9) = state.C_bn;
    return F;
}

Mat12 assemble_G(const ins::NavState& state) {
    Mat12 G = Mat12::Zero();
    G.block<3, 3>(0, 0) = state.C_bn;
    G.block<3, 3>(3, 3) = -state.C_bn;
    G.block<3, 3>(6, 6) = Mat3::Identity();
    G.block<3, 3>(9, 9) = Mat3::Identity();
    return G;
}

Mat12 transition_matrix(const Mat12& F, double tau_s, int order) {
    if (order < 1) {
        throw NumericError("transition_matrix: order must be >= 1");
    }
    Mat12 phi = Mat12::Identity();
    Mat12 term = Mat12::Identity();
    for (int r = 1; r <= order; ++r) {
        term = (term * F) * (tau_s / static_cast<double>(r));
        phi += term;
    }
    return phi;
}

Mat12 discretize_Q(const Mat12& Phi, const Mat12& G, const Mat12& Q,
                   double dt) {
    const Mat12 M = G * Q * G.transpose();
    Mat12 Qk = 0.5 * (Phi * M + M * Phi.transpose()) * dt;
    return 0.5 * (Qk + Qk.transpose());
}

Mat12 predict(const Mat12& P, const Mat12& Phi, const Mat12& Q_k) {
    Mat12 out = Phi * P * Phi.transpose() + Q_k;
    return 0.5 * (out + out.transpose());
}

Mat3x12 assemble_H(const ins::NavState& state) {
    Mat3x12 H = Mat3x12::Zero();
    const Mat3 C_nb = state.C_bn.transpose();
    H.block<3, 3>(0, 0) = C_nb;
    H.block<3, 3>(0, 3) = -C_nb * frames::skew(state.v_n);
    return H;
}

std::pair<ErrorState, Mat12> update(const Mat12& P, const Mat3x12& H,
                                    const Mat3& R, const Vec3& dz) {
    const Mat3 S = H * P * H.transpose() + R;
    Eigen::LLT<Mat3> llt(S);
    if (llt.info() != Eigen::Success) {
        throw NumericError("ekf::update: innovation covariance not positive definite");
    }
    const Eigen::Matrix<double, 12, 3> K = P * H.transpose() * llt.solve(Mat3::Identity());
    const Vec12 dx = K * dz;
    Mat12 Pp = (Mat12::Identity() - K * H) * P;
    Pp = 0.5 * (Pp + Pp.transpose());
    return {ErrorState::from_vector(dx), Pp};
}

ins::NavState feedback(const ins::NavState& state, const ErrorState& dx) {
    ins::NavState out = state;
    out.v_n += dx.dv;
    out.C_bn = frames::apply_small_angle_correction(state.C_bn, dx.eps);
    out.b_a += dx.db_a;
    out.b_g += dx.db_g;
    return out;
}

Mat12 default_p0() {
    const double deg = M_PI / 180.0;
    const double vel = 0.1;                   // m/s
    const double att = 0.5 * deg;             // rad
    const double ba = 1e-3 * 9.80665;         // 1 mg
    const double bg = 10.0 * deg / 3600.0;    // 10 deg/h
    Mat12 P0 = Mat12::Zero();
    P0.block<3, 3>(0, 0) = vel * vel * Mat3::Identity();
    P0.block<3, 3>(3, 3) = att * att * Mat3::Identity();
    P0.block<3, 3>(6, 6) = ba * ba * Mat3::Identity();
    P0.block<3, 3>(9, 9) = bg * bg * Mat3::Identity();
    return P0;
}

Mat3 dvl_measurement_noise(const dvl::BeamGeometry& geom, double noise_std) {
    const Mat3 normal = geom.A.transpose() * geom.A;
    return noise_std * noise_std * normal.inverse();
}

void Filter::propagate(const ins::ImuSample& imu, double dt) {
    const Mat12 F = assemble_F(state_, imu);
    const Mat12 Phi = transition_matrix(F, dt, params_.taylor_order);
    const Mat12 G = assemble_G(state_);
    const Mat12 Qk = discretize_Q(Phi, G, params_.noise.matrix(), dt);
    P_ = predict(P_, Phi, Qk);
    state_ = ins::mechanize_step(state_, imu, dt, params_.g_n);
}

Vec3 Filter::update_velocity(const Vec3& v_body_meas, double r_scale) {
    const Mat3x12 H = assemble_H(state_);
    const Vec3 predicted = state_.C_bn.transpose() * state_.v_n;
    const Vec3 dz = v_body_meas - predicted;
    auto [dx, Pp] = update(P_, H, Mat3(r_scale * params_.R), dz);
    P_ = Pp;
    state_ = feedback(state_, dx);
    return dz;
}

}  // namespace ekf
}  // namespace stnav
