#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fixpose/geometry.hpp"

namespace fixpose {

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Triangle = std::array<std::uint32_t, 3>;

/// Fixture surface. Coordinates are in meters.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;

  std::size_t triangle_count() const { return triangles.size(); }
  std::array<Vec3, 3> corners(std::size_t t) const;
  double area(std::size_t t) const;
  double total_area() const;
};

/// Throws MeshError if any coordinate is non-finite or an index is out of range.
void validate(const TriangleMesh& mesh);

/// Removes triangles with repeated indices or zero area; returns how many were dropped.
std::size_t drop_degenerate_triangles(TriangleMesh& mesh);

/// Parses an ASCII OBJ stream. Faces with more than three corners are fan-triangulated.
TriangleMesh parse_obj(std::istream& in);

/// Parses binary or ASCII STL bytes; vertices are merged by exact coordinate match.
TriangleMesh parse_stl(std::string_view bytes);

/// Reads an OBJ or STL file, scales coordinates by `unit_scale` and drops degenerate
/// triangles (with a warning). Throws MeshError on unreadable, unsupported or empty input.
TriangleMesh load_mesh(const std::filesystem::path& path, double unit_scale = 1.0);

void write_obj(const TriangleMesh& mesh, std::ostream& out);

/// Maps a --unit flag value ("m", "cm", "mm") to a scale factor into meters.
double unit_scale_from_name(std::string_view unit);

/// p -> scale * p + offset applied to every vertex.
TriangleMesh transformed(const TriangleMesh& mesh, double scale, const Vec3& offset);

/// Stable 64-bit FNV-1a digest over vertex coordinates and indices.
std::uint64_t mesh_digest(const TriangleMesh& mesh);

}  // namespace fixpose
