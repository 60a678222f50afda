#pragma once

#include <span>
#include <string>
#include <utility>

#include "fixpose/geometry.hpp"
#include "fixpose/pose_distribution.hpp"

namespace fixpose::app {

/// Mollweide projection of (longitude, latitude) in radians onto the ellipse
/// |x| <= 2 sqrt(2), |y| <= sqrt(2).
std::pair<double, double> mollweide(double longitude, double latitude);

/// Projection of the rotated z-axis of q.
std::pair<double, double> mollweide_of(const Quat& q);

/// Hue in degrees for a tilt angle in [0, 2 pi).
double tilt_hue(double tilt);

struct PlotOptions {
  std::size_t max_points = 20000;  ///< most probable samples drawn
  int width = 900;
};

/// SVG document: samples by rotated z-axis, hue by tilt, radius by probability.
/// Markers (hollow circles) are drawn for `markers`. Throws std::invalid_argument
/// on an empty distribution.
std::string mollweide_svg(std::span<const WeightedPose> samples, std::span<const Quat> markers = {},
                          const PlotOptions& options = {});

}  // namespace fixpose::app
