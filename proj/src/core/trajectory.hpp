#pragma once

#include "core/frames.hpp"

namespace stnav {

// Analytic ground-truth kinematics at time t. a_n is the NED acceleration
// (time derivative of v_n), omega_b the body angular rate consistent with
// Cdot = C * skew(omega_b).
struct TrajectorySample {
    Vec3 v_n = Vec3::Zero();
    Vec3 a_n = Vec3::Zero();
    Rotation C_bn = Rotation::Identity();
    Vec3 omega_b = Vec3::Zero();
};

class Trajectory {
public:
    virtual ~Trajectory() = default;
    virtual TrajectorySample sample(double t) const = 0;
    virtual double duration() const = 0;
};

}  // namespace stnav
