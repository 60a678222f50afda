#include "fixpose_app/plot.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "fixpose/se3_grid.hpp"

namespace fixpose::app {

std::pair<double, double> mollweide(double longitude, double latitude) {
  // Solve 2a + sin 2a = pi sin(lat) for the auxiliary angle a.
  double a = latitude;
  const double target = M_PI * std::sin(latitude);
  if (std::abs(std::abs(latitude) - M_PI / 2) < 1e-12) {
    a = latitude;
  } else {
    for (int i = 0; i < 50; ++i) {
      const double f = 2.0 * a + std::sin(2.0 * a) - target;
      const double df = 2.0 + 2.0 * std::cos(2.0 * a);
      if (df < 1e-15) break;
      const double step = f / df;
      a -= step;
      if (std::abs(step) < 1e-14) break;
    }
  }
  return {2.0 * std::sqrt(2.0) / M_PI * longitude * std::cos(a), std::sqrt(2.0) * std::sin(a)};
}

std::pair<double, double> mollweide_of(const Quat& q) {
  const Vec3 d = q.normalized().toRotationMatrix().col(2);
  return mollweide(std::atan2(d.y(), d.x()), std::asin(std::clamp(d.z(), -1.0, 1.0)));
}

double tilt_hue(double tilt) {
  double deg = tilt * 180.0 / M_PI;
  deg = std::fmod(deg, 360.0);
  return deg < 0.0 ? deg + 360.0 : deg;
}

std::string mollweide_svg(std::span<const WeightedPose> samples, std::span<const Quat> markers,
                          const PlotOptions& options) {
  if (samples.empty()) throw std::invalid_argument("cannot plot an empty distribution");
  const double w = options.width;
  const double h = w / 2.0;
  const double sx = (w / 2.0 - 10.0) / (2.0 * std::sqrt(2.0));
  const double sy = (h / 2.0 - 10.0) / std::sqrt(2.0);
  auto px = [&](double x) { return w / 2.0 + sx * x; };
  auto py = [&](double y) { return h / 2.0 - sy * y; };

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return samples[a].probability > samples[b].probability; });
  order.resize(std::min(order.size(), options.max_points));
  const double top = std::max(samples[order.front()].probability, 1e-300);
  // Draw the most probable last so they end up on top.
  std::reverse(order.begin(), order.end());

  std::ostringstream svg;
  svg.setf(std::ios::fixed);
  svg.precision(2);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
      << ' ' << h << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<ellipse cx=\"" << w / 2 << "\" cy=\"" << h / 2 << "\" rx=\"" << sx * 2.0 * std::sqrt(2.0) << "\" ry=\""
      << sy * std::sqrt(2.0) << "\" fill=\"none\" stroke=\"#888\" stroke-width=\"1\"/>\n";
  for (int lat = -60; lat <= 60; lat += 30) {
    const auto [x0, y0] = mollweide(-M_PI, lat * M_PI / 180.0);
    const auto [x1, y1] = mollweide(M_PI, lat * M_PI / 180.0);
    svg << "<line x1=\"" << px(x0) << "\" y1=\"" << py(y0) << "\" x2=\"" << px(x1) << "\" y2=\"" << py(y1)
        << "\" stroke=\"#ddd\" stroke-width=\"0.5\"/>\n";
  }
  svg << "<g stroke=\"none\">\n";
  for (std::size_t i : order) {
    const auto& s = samples[i];
    const auto [x, y] = mollweide_of(s.pose.rotation);
    const double r = 0.8 + 3.2 * std::sqrt(std::max(0.0, s.probability) / top);
    svg << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"" << r << "\" fill=\"hsl("
        << tilt_hue(tilt_angle(s.pose.rotation)) << ",85%,45%)\"/>\n";
  }
  svg << "</g>\n";
  if (!markers.empty()) {
    svg << "<g fill=\"none\" stroke=\"black\" stroke-width=\"1.2\">\n";
    for (const Quat& q : markers) {
      const auto [x, y] = mollweide_of(q);
      svg << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"7\"/>\n";
    }
    svg << "</g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace fixpose::app
