#pragma once

#include <vector>

#include <Eigen/Dense>

#include "core/frames.hpp"
#include "core/rng.hpp"

namespace stnav {
namespace dvl {

using Vec4 = Eigen::Vector4d;
using Mat43 = Eigen::Matrix<double, 4, 3>;

// Four-beam Janus "x" geometry: beam i has yaw (i-1)*90deg + 45deg and a
// common pitch theta off the vertical. Rows of A are the unit beam
// directions in the body frame, so beam velocities are A * v_body.
struct BeamGeometry {
    double theta = 0.0;  // [rad]
    Mat43 A = Mat43::Zero();
};

struct DvlErrorParams {
    Vec4 scale = Vec4::Zero();     // per-beam scale factor, unitless
    Vec4 bias = Vec4::Zero();      // per-beam bias [m/s]
    double noise_std = 0.0;        // beam white-noise std [m/s]
};

struct DvlMeasurement {
    double t = 0.0;                 // [s]
    Vec4 beams = Vec4::Zero();      // beam velocities [m/s]
    Vec3 body_velocity = Vec3::Zero();  // LS solution [m/s]
    bool valid = true;
    bool predicted = false;         // true when produced by the network
};

// Rejects theta outside (0, pi/2).
BeamGeometry beam_directions(double theta);

// Beam error model: y_i = (A v)_i (1 + scale_i) + bias_i + noise.
Vec4 synthesize_beams(const Vec3& v_body, const BeamGeometry& geom,
                      const DvlErrorParams& err, Rng& rng);

// Least-squares body velocity: (A^T A)^-1 A^T y. Throws NumericError when
// the normal matrix is singular.
Vec3 ls_solve(const Vec4& beams, const BeamGeometry& geom);

// Marks measurements with t in [t_init, t_init + t_duration) invalid.
// Throws DataError when the window falls outside the stream span.
std::vector<DvlMeasurement> apply_outage(std::vector<DvlMeasurement> stream,
                                         double t_init, double t_duration);

}  // namespace dvl
}  // namespace stnav
