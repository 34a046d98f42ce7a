#include "core/strapdown.hpp"

#include <cmath>

namespace stnav {
namespace ins {

namespace {

// One polar-decomposition Newton step; enough to hold orthonormality at
// 1e-9 over millions of steps since the input is already near-orthonormal.
Rotation renormalize(const Rotation& R) {
    return 0.5 * R * (3.0 * Mat3::Identity() - R.transpose() * R);
}

}  // namespace

NavState mechanize_step(const NavState& state, const ImuSample& imu, double dt,
                        const Vec3& g_n) {
    const Vec3 omega = imu.omega_b - state.b_g;
    const Vec3 f = imu.f_b - state.b_a;

    // Mid-interval attitude keeps the velocity integral second-order.
    const Rotation C_half = state.C_bn * frames::exp_so3(omega * (0.5 * dt));

    NavState next = state;
    next.t = state.t + dt;
    next.v_n = state.v_n + (C_half * f + g_n) * dt;
    next.p_n = state.p_n + 0.5 * (state.v_n + next.v_n) * dt;
    next.C_bn = renormalize(state.C_bn * frames::exp_so3(omega * dt));
    return next;
}

std::vector<ImuSample> inverse_mechanize(const Trajectory& traj, double dt,
                                         const Vec3& g_n) {
    const auto n = static_cast<std::size_t>(std::llround(traj.duration() / dt));
    std::vector<ImuSample> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * dt;
        const TrajectorySample s = traj.sample(t + 0.5 * dt);
        ImuSample imu;
        imu.t = t;
        imu.f_b = s.C_bn.transpose() * (s.a_n - g_n);
        imu.omega_b = s.omega_b;
        out.push_back(imu);
    }
    return out;
}

}  // namespace ins
}  // namespace stnav
