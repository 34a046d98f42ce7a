#include "core/dvl.hpp"

#include <cmath>

#include "core/errors.hpp"

namespace stnav {
namespace dvl {

BeamGeometry beam_directions(double theta) {
    if (!(theta > 0.0) || !(theta < M_PI / 2.0)) {
        throw NumericError("beam_directions: theta must lie in (0, pi/2)");
    }
    BeamGeometry geom;
    geom.theta = theta;
    const double st = std::sin(theta);
    const double ct = std::cos(theta);
    for (int i = 0; i < 4; ++i) {
        const double psi = i * (M_PI / 2.0) + M_PI / 4.0;
        geom.A(i, 0) = std::cos(psi) * st;
        geom.A(i, 1) = std::sin(psi) * st;
        geom.A(i, 2) = ct;
    }
    return geom;
}

Vec4 synthesize_beams(const Vec3& v_body, const BeamGeometry& geom,
                      const DvlErrorParams& err, Rng& rng) {
    const Vec4 clean = geom.A * v_body;
    Vec4 out;
    for (int i = 0; i < 4; ++i) {
        out(i) = clean(i) * (1.0 + err.scale(i)) + err.bias(i) +
                 rng.gaussian(0.0, err.noise_std);
    }
    return out;
}

Vec3 ls_solve(const Vec4& beams, const BeamGeometry& geom) {
    const Mat3 normal = geom.A.transpose() * geom.A;
    // For the Janus geometry the normal matrix is diagonal and well
    // conditioned for any theta in (0, pi/2); guard anyway.
    const double det = normal.determinant();
    if (!(std::abs(det) > 1e-12)) {
        throw NumericError("ls_solve: singular normal matrix (degenerate beam geometry)");
    }
    return normal.inverse() * (geom.A.transpose() * beams);
}

std::vector<DvlMeasurement> apply_outage(std::vector<DvlMeasurement> stream,
                                         double t_init, double t_duration) {
    if (t_duration < 0.0) {
        throw DataError("apply_outage: negative duration");
    }
    if (t_duration == 0.0 || stream.empty()) {
        return stream;
    }
    const double t0 = stream.front().t;
    const double t1 = stream.back().t;
    if (t_init < t0 || t_init + t_duration > t1 + 1.0) {
        throw DataError("apply_outage: window outside stream span");
    }
    for (auto& m : stream) {
        if (m.t >= t_init && m.t < t_init + t_duration) {
            m.valid = false;
        }
    }
    return stream;
}

}  // namespace dvl
}  // namespace stnav
