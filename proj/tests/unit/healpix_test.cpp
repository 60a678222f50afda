#include <cstdint>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "fixpose/healpix.hpp"

using namespace fixpose;

namespace {
#include "healpix_reference.inc"
}

TEST(Healpix, PixelCentersMatchReference) {
  for (const auto& r : kPixelReference) {
    const Vec3 c = healpix::pixel_center(r.level, r.pixel);
    EXPECT_LT((c - Vec3(r.x, r.y, r.z)).norm(), 1e-12) << "level " << r.level << " pixel " << r.pixel;
  }
}

TEST(Healpix, FaceCoordinatesMatchReference) {
  for (const auto& r : kPixelReference) {
    const auto fp = healpix::nest_to_xyf(r.level, r.pixel);
    EXPECT_EQ(fp.face, r.face);
    EXPECT_EQ(fp.ix, r.ix);
    EXPECT_EQ(fp.iy, r.iy);
    EXPECT_EQ(healpix::xyf_to_nest(r.level, fp), r.pixel);
  }
}

TEST(Healpix, PointLocationMatchesReference) {
  for (const auto& r : kLocateReference) {
    EXPECT_EQ(healpix::pixel_of(r.level, Vec3(r.x, r.y, r.z)), r.pixel) << "level " << r.level;
  }
}

TEST(Healpix, CentersLocateToTheirOwnPixel) {
  for (int level : {0, 1, 2, 3}) {
    for (std::uint64_t p = 0; p < healpix::pixel_count(level); ++p) {
      ASSERT_EQ(healpix::pixel_of(level, healpix::pixel_center(level, p)), p);
    }
  }
}

TEST(Healpix, NestedChildrenShareParent) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 20000; ++i) {
    const Vec3 d = Vec3(n(rng), n(rng), n(rng)).normalized();
    for (int level = 0; level < 8; ++level) {
      ASSERT_EQ(healpix::pixel_of(level + 1, d) >> 2, healpix::pixel_of(level, d));
    }
  }
}

TEST(Healpix, EqualArea) {
  // Uniform directions fall into every level-2 pixel with equal frequency.
  std::mt19937_64 rng(32);
  std::normal_distribution<double> n(0.0, 1.0);
  const int level = 2;
  const std::size_t draws = 192000;
  std::vector<int> counts(healpix::pixel_count(level));
  for (std::size_t i = 0; i < draws; ++i) ++counts[healpix::pixel_of(level, Vec3(n(rng), n(rng), n(rng)).normalized())];
  const double expected = double(draws) / double(counts.size());
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 191 degrees of freedom; 99.9th percentile is about 260.
  EXPECT_LT(chi2, 260.0);
}

TEST(Healpix, PixelPointCornersAreShared) {
  // In-pixel coordinates at a shared edge map to the same direction.
  const int level = 3;
  for (std::uint64_t p = 0; p < healpix::pixel_count(level); ++p) {
    const Vec3 a = healpix::pixel_point(level, p, 0.0, 0.0);
    EXPECT_NEAR(a.norm(), 1.0, 1e-14);
  }
  const auto fp = healpix::nest_to_xyf(level, 100);
  healpix::FacePixel right = fp;
  right.ix += 1;
  ASSERT_LT(right.ix, 1u << level);
  const auto q = healpix::xyf_to_nest(level, right);
  EXPECT_LT((healpix::pixel_point(level, 100, 1.0, 0.3) - healpix::pixel_point(level, q, 0.0, 0.3)).norm(), 1e-14);
}
