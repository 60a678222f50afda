#pragma once

#include <cstdint>

#include "fixpose/geometry.hpp"

/// The subset of HEALPix (nested scheme) needed for the rotation grid:
/// pixel indexing, continuous in-pixel coordinates, and point location.
/// Level k has nside = 2^k and 12 * 4^k pixels.
namespace fixpose::healpix {

inline constexpr int kBaseFaces = 12;
inline constexpr int kMaxLevel = 29;

struct FacePixel {
  int face = 0;
  std::uint32_t ix = 0;
  std::uint32_t iy = 0;
};

constexpr std::uint64_t pixel_count(int level) { return std::uint64_t{12} << (2 * level); }

FacePixel nest_to_xyf(int level, std::uint64_t pixel);
std::uint64_t xyf_to_nest(int level, const FacePixel& fp);

/// Unit vector for continuous face coordinates (x, y) in [0,1]^2 of base face `face`.
/// The map is equal-area: uniform (x, y) gives uniform directions on the face.
Vec3 face_point(int face, double x, double y);

/// Unit vector at in-pixel coordinates (u, v) in [0,1]^2; (0.5, 0.5) is the center.
Vec3 pixel_point(int level, std::uint64_t pixel, double u, double v);

inline Vec3 pixel_center(int level, std::uint64_t pixel) { return pixel_point(level, pixel, 0.5, 0.5); }

/// Nested pixel index containing the unit vector `dir`.
std::uint64_t pixel_of(int level, const Vec3& dir);

}  // namespace fixpose::healpix
