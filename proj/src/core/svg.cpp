#include "core/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "core/errors.hpp"

namespace stnav {
namespace svg {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

void write_trajectory_plot(const std::string& path,
                           const std::vector<Series>& series,
                           const Vec3& start_point, const std::string& title) {
    double min_e = start_point.y(), max_e = start_point.y();
    double min_n = start_point.x(), max_n = start_point.x();
    for (const auto& s : series) {
        for (const auto& p : s.points) {
            min_e = std::min(min_e, p.y());
            max_e = std::max(max_e, p.y());
            min_n = std::min(min_n, p.x());
            max_n = std::max(max_n, p.x());
        }
    }
    const double span_e = std::max(1.0, max_e - min_e);
    const double span_n = std::max(1.0, max_n - min_n);
    const double w = 640.0, h = 640.0, margin = 60.0;
    const double sx = (w - 2 * margin) / span_e;
    const double sy = (h - 2 * margin) / span_n;
    auto px = [&](double east) { return margin + (east - min_e) * sx; };
    // North grows upward on the page.
    auto py = [&](double north) { return h - margin - (north - min_n) * sy; };

    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path);
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
      << "\" height=\"" << h << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
    f << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    f << "<text x=\"" << w / 2 << "\" y=\"28\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";
    f << "<text x=\"" << w / 2 << "\" y=\"" << h - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
         "East [m]</text>\n";
    f << "<text x=\"16\" y=\"" << h / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
         "transform=\"rotate(-90 16 " << h / 2 << ")\">North [m]</text>\n";

    double legend_y = 46.0;
    for (const auto& s : series) {
        if (s.points.empty()) continue;
        f << "<polyline fill=\"none\" stroke=\"" << s.color
          << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& p : s.points)
            f << num(px(p.y())) << "," << num(py(p.x())) << " ";
        f << "\"/>\n";
        f << "<text x=\"" << w - margin - 110 << "\" y=\"" << legend_y
          << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << s.color
          << "\">" << s.label << "</text>\n";
        legend_y += 16.0;
    }

    // Start marker: five-pointed star.
    const double cx = px(start_point.y()), cy = py(start_point.x());
    f << "<g fill=\"purple\"><polygon points=\"";
    for (int i = 0; i < 10; ++i) {
        const double r = (i % 2 == 0) ? 8.0 : 3.5;
        const double a = -M_PI / 2 + i * M_PI / 5;
        f << num(cx + r * std::cos(a)) << "," << num(cy + r * std::sin(a)) << " ";
    }
    f << "\"/></g>\n";
    f << "</svg>\n";
}

}  // namespace svg
}  // namespace stnav
