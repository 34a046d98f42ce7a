#pragma once

#include <Eigen/Dense>

namespace stnav {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Body-to-NED direction cosine matrix. Kept as a plain Mat3; producers are
// responsible for orthonormality (see orthonormalize).
using Rotation = Mat3;

namespace frames {

// Skew-symmetric matrix S such that S*u == v x u.
Mat3 skew(const Vec3& v);

// ZYX intrinsic (yaw-pitch-roll) Euler angles to C_b^n, NED convention.
Rotation rotation_from_euler(double roll, double pitch, double yaw);

// Inverse of rotation_from_euler. Valid away from pitch = +/-pi/2.
void euler_from_rotation(const Rotation& R, double& roll, double& pitch,
                         double& yaw);

// Nearest orthonormal matrix with det +1 (symmetric orthogonalization).
Rotation orthonormalize(const Rotation& R);

// (I - skew(eps)) * R, re-orthonormalized. eps is a small nav-frame
// attitude error in radians.
Rotation apply_small_angle_correction(const Rotation& R, const Vec3& eps);

// Rodrigues formula: exp(skew(phi)) for a rotation vector phi.
Rotation exp_so3(const Vec3& phi);

}  // namespace frames
}  // namespace stnav
