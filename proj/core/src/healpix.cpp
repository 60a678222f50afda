#include "fixpose/healpix.hpp"

#include <algorithm>
#include <cmath>

namespace fixpose::healpix {
namespace {

constexpr int kJrll[kBaseFaces] = {2, 2, 2, 2, 3, 3, 3, 3, 4, 4, 4, 4};
constexpr int kJpll[kBaseFaces] = {1, 3, 5, 7, 0, 2, 4, 6, 1, 3, 5, 7};

std::uint32_t compact_even_bits(std::uint64_t v) {
  v &= 0x5555555555555555ULL;
  v = (v | (v >> 1)) & 0x3333333333333333ULL;
  v = (v | (v >> 2)) & 0x0f0f0f0f0f0f0f0fULL;
  v = (v | (v >> 4)) & 0x00ff00ff00ff00ffULL;
  v = (v | (v >> 8)) & 0x0000ffff0000ffffULL;
  v = (v | (v >> 16)) & 0x00000000ffffffffULL;
  return static_cast<std::uint32_t>(v);
}

std::uint64_t spread_bits(std::uint32_t x) {
  std::uint64_t v = x;
  v = (v | (v << 16)) & 0x0000ffff0000ffffULL;
  v = (v | (v << 8)) & 0x00ff00ff00ff00ffULL;
  v = (v | (v << 4)) & 0x0f0f0f0f0f0f0f0fULL;
  v = (v | (v << 2)) & 0x3333333333333333ULL;
  v = (v | (v << 1)) & 0x5555555555555555ULL;
  return v;
}

}  // namespace

FacePixel nest_to_xyf(int level, std::uint64_t pixel) {
  const std::uint64_t within = pixel & ((std::uint64_t{1} << (2 * level)) - 1);
  return {static_cast<int>(pixel >> (2 * level)), compact_even_bits(within), compact_even_bits(within >> 1)};
}

std::uint64_t xyf_to_nest(int level, const FacePixel& fp) {
  return (static_cast<std::uint64_t>(fp.face) << (2 * level)) + spread_bits(fp.ix) + (spread_bits(fp.iy) << 1);
}

Vec3 face_point(int face, double x, double y) {
  const double jr = kJrll[face] - x - y;
  double nr;
  double z;
  double sth;
  if (jr < 1.0) {
    nr = jr;
    const double t = nr * nr / 3.0;
    z = 1.0 - t;
    sth = std::sqrt(t * (2.0 - t));
  } else if (jr > 3.0) {
    nr = 4.0 - jr;
    const double t = nr * nr / 3.0;
    z = t - 1.0;
    sth = std::sqrt(t * (2.0 - t));
  } else {
    nr = 1.0;
    z = (2.0 - jr) * 2.0 / 3.0;
    sth = std::sqrt((1.0 - z) * (1.0 + z));
  }
  double t = kJpll[face] * nr + x - y;
  if (t < 0.0) t += 8.0;
  if (t >= 8.0) t -= 8.0;
  const double phi = (nr < 1e-15) ? 0.0 : 0.25 * M_PI * t / nr;
  return Vec3(sth * std::cos(phi), sth * std::sin(phi), z);
}

Vec3 pixel_point(int level, std::uint64_t pixel, double u, double v) {
  const FacePixel fp = nest_to_xyf(level, pixel);
  const double inv_nside = 1.0 / static_cast<double>(std::uint64_t{1} << level);
  return face_point(fp.face, (fp.ix + u) * inv_nside, (fp.iy + v) * inv_nside);
}

std::uint64_t pixel_of(int level, const Vec3& dir) {
  const std::int64_t nside = std::int64_t{1} << level;
  const double z = std::clamp(dir.z() / dir.norm(), -1.0, 1.0);
  const double za = std::abs(z);
  double tt = std::atan2(dir.y(), dir.x()) / (0.5 * M_PI);
  if (tt < 0.0) tt += 4.0;
  if (tt >= 4.0) tt -= 4.0;

  if (za <= 2.0 / 3.0) {
    const double temp1 = static_cast<double>(nside) * (0.5 + tt);
    const double temp2 = static_cast<double>(nside) * (z * 0.75);
    const auto jp = static_cast<std::int64_t>(temp1 - temp2);
    const auto jm = static_cast<std::int64_t>(temp1 + temp2);
    const std::int64_t ifp = jp >> level;
    const std::int64_t ifm = jm >> level;
    const int face = (ifp == ifm) ? static_cast<int>(ifp | 4)
                                   : ((ifp < ifm) ? static_cast<int>(ifp) : static_cast<int>(ifm + 8));
    const auto ix = static_cast<std::uint32_t>(jm & (nside - 1));
    const auto iy = static_cast<std::uint32_t>(nside - (jp & (nside - 1)) - 1);
    return xyf_to_nest(level, {face, ix, iy});
  }

  const int ntt = std::min(3, static_cast<int>(tt));
  const double tp = tt - ntt;
  const double sth = std::hypot(dir.x(), dir.y()) / dir.norm();
  const double tmp = (za < 0.99) ? static_cast<double>(nside) * std::sqrt(3.0 * (1.0 - za))
                                 : static_cast<double>(nside) * sth / std::sqrt((1.0 + za) / 3.0);
  std::int64_t jp = static_cast<std::int64_t>(tp * tmp);
  std::int64_t jm = static_cast<std::int64_t>((1.0 - tp) * tmp);
  jp = std::min(jp, nside - 1);
  jm = std::min(jm, nside - 1);
  if (z > 0.0) {
    return xyf_to_nest(level, {ntt, static_cast<std::uint32_t>(nside - jm - 1), static_cast<std::uint32_t>(nside - jp - 1)});
  }
  return xyf_to_nest(level, {ntt + 8, static_cast<std::uint32_t>(jp), static_cast<std::uint32_t>(jm)});
}

}  // namespace fixpose::healpix
