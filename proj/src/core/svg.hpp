#pragma once

#include <string>
#include <vector>

#include "core/frames.hpp"

namespace stnav {
namespace svg {

struct Series {
    std::string label;
    std::string color;
    std::vector<Vec3> points;  // north/east used, down ignored
};

// North-East trajectory plot with a start marker. East on the horizontal
// axis, north on the vertical.
void write_trajectory_plot(const std::string& path,
                           const std::vector<Series>& series,
                           const Vec3& start_point, const std::string& title);

}  // namespace svg
}  // namespace stnav
