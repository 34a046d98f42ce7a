#include "core/frames.hpp"

#include <cmath>

namespace stnav {
namespace frames {

Mat3 skew(const Vec3& v) {
    Mat3 s;
    s <<    0.0, -v.z(),  v.y(),
          v.z(),    0.0, -v.x(),
         -v.y(),  v.x(),    0.0;
    return s;
}

Rotation rotation_from_euler(double roll, double pitch, double yaw) {
    const double cr = std::cos(roll), sr = std::sin(roll);
    const double cp = std::cos(pitch), sp = std::sin(pitch);
    const double cy = std::cos(yaw), sy = std::sin(yaw);

    Mat3 rz, ry, rx;
    rz << cy, -sy, 0.0,
          sy,  cy, 0.0,
         0.0, 0.0, 1.0;
    ry <<  cp, 0.0,  sp,
          0.0, 1.0, 0.0,
          -sp, 0.0,  cp;
    rx << 1.0, 0.0, 0.0,
          0.0,  cr, -sr,
          0.0,  sr,  cr;
    return rz * ry * rx;
}

void euler_from_rotation(const Rotation& R, double& roll, double& pitch,
                         double& yaw) {
    pitch = std::asin(std::clamp(-R(2, 0), -1.0, 1.0));
    roll = std::atan2(R(2, 1), R(2, 2));
    yaw = std::atan2(R(1, 0), R(0, 0));
}

Rotation orthonormalize(const Rotation& R) {
    // Symmetric orthogonalization via SVD: closest rotation in Frobenius norm.
    Eigen::JacobiSVD<Mat3> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 out = svd.matrixU() * svd.matrixV().transpose();
    if (out.determinant() < 0.0) {
        Mat3 flip = Mat3::Identity();
        flip(2, 2) = -1.0;
        out = svd.matrixU() * flip * svd.matrixV().transpose();
    }
    return out;
}

Rotation apply_small_angle_correction(const Rotation& R, const Vec3& eps) {
    return orthonormalize((Mat3::Identity() - skew(eps)) * R);
}

Rotation exp_so3(const Vec3& phi) {
    const double angle = phi.norm();
    if (angle < 1e-12) {
        // Second-order expansion; exact to double precision at this scale.
        const Mat3 s = skew(phi);
        return Mat3::Identity() + s + 0.5 * s * s;
    }
    const Vec3 axis = phi / angle;
    const Mat3 s = skew(axis);
    return Mat3::Identity() + std::sin(angle) * s +
           (1.0 - std::cos(angle)) * s * s;
}

}  // namespace frames
}  // namespace stnav
