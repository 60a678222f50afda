#include "fixpose/mesh.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "fixpose/log.hpp"

namespace fixpose {

std::array<Vec3, 3> TriangleMesh::corners(std::size_t t) const {
  const Triangle& tri = triangles[t];
  return {vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]};
}

double TriangleMesh::area(std::size_t t) const {
  const auto [a, b, c] = corners(t);
  return 0.5 * (b - a).cross(c - a).norm();
}

double TriangleMesh::total_area() const {
  double sum = 0.0;
  for (std::size_t t = 0; t < triangles.size(); ++t) sum += area(t);
  return sum;
}

void validate(const TriangleMesh& mesh) {
  for (const Vec3& v : mesh.vertices) {
    if (!v.allFinite()) throw MeshError("mesh has a non-finite vertex coordinate");
  }
  const auto n = mesh.vertices.size();
  for (const Triangle& tri : mesh.triangles) {
    for (std::uint32_t idx : tri) {
      if (idx >= n) throw MeshError("triangle index out of range");
    }
  }
}

std::size_t drop_degenerate_triangles(TriangleMesh& mesh) {
  std::vector<Triangle> kept;
  kept.reserve(mesh.triangles.size());
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const Triangle& tri = mesh.triangles[t];
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) continue;
    const auto [a, b, c] = mesh.corners(t);
    const double longest = std::max({(b - a).squaredNorm(), (c - b).squaredNorm(), (a - c).squaredNorm()});
    const double twice_area = (b - a).cross(c - a).norm();
    if (!(twice_area > 1e-14 * longest)) continue;
    kept.push_back(tri);
  }
  const std::size_t dropped = mesh.triangles.size() - kept.size();
  mesh.triangles = std::move(kept);
  return dropped;
}

namespace {

std::uint32_t resolve_obj_index(long idx, std::size_t vertex_count) {
  if (idx > 0) return static_cast<std::uint32_t>(idx - 1);
  if (idx < 0 && static_cast<std::size_t>(-idx) <= vertex_count) {
    return static_cast<std::uint32_t>(static_cast<long>(vertex_count) + idx);
  }
  throw MeshError("invalid OBJ face index " + std::to_string(idx));
}

class VertexPool {
 public:
  explicit VertexPool(TriangleMesh& mesh) : mesh_(mesh) {}

  std::uint32_t add(const Vec3& v) {
    const std::array<double, 3> key{v.x(), v.y(), v.z()};
    auto [it, inserted] = lookup_.try_emplace(key, static_cast<std::uint32_t>(mesh_.vertices.size()));
    if (inserted) mesh_.vertices.push_back(v);
    return it->second;
  }

 private:
  TriangleMesh& mesh_;
  std::map<std::array<double, 3>, std::uint32_t> lookup_;
};

TriangleMesh parse_binary_stl(std::string_view bytes) {
  std::uint32_t count = 0;
  std::memcpy(&count, bytes.data() + 80, sizeof(count));
  TriangleMesh mesh;
  VertexPool pool(mesh);
  const char* p = bytes.data() + 84;
  for (std::uint32_t t = 0; t < count; ++t, p += 50) {
    float raw[12];
    std::memcpy(raw, p, sizeof(raw));
    Triangle tri{};
    for (int k = 0; k < 3; ++k) {
      tri[k] = pool.add(Vec3(raw[3 + 3 * k], raw[4 + 3 * k], raw[5 + 3 * k]));
    }
    mesh.triangles.push_back(tri);
  }
  return mesh;
}

TriangleMesh parse_ascii_stl(std::string_view bytes) {
  std::istringstream in{std::string(bytes)};
  TriangleMesh mesh;
  VertexPool pool(mesh);
  std::string token;
  std::vector<std::uint32_t> facet;
  while (in >> token) {
    if (token == "vertex") {
      Vec3 v;
      if (!(in >> v.x() >> v.y() >> v.z())) throw MeshError("malformed ASCII STL vertex");
      facet.push_back(pool.add(v));
    } else if (token == "endfacet") {
      if (facet.size() != 3) throw MeshError("ASCII STL facet without exactly three vertices");
      mesh.triangles.push_back({facet[0], facet[1], facet[2]});
      facet.clear();
    }
  }
  return mesh;
}

}  // namespace

TriangleMesh parse_obj(std::istream& in) {
  TriangleMesh mesh;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x() >> v.y() >> v.z())) {
        throw MeshError("malformed OBJ vertex on line " + std::to_string(line_no));
      }
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<std::uint32_t> poly;
      std::string corner;
      while (ls >> corner) {
        const long idx = std::stol(corner.substr(0, corner.find('/')));
        poly.push_back(resolve_obj_index(idx, mesh.vertices.size()));
      }
      if (poly.size() < 3) throw MeshError("OBJ face with fewer than 3 corners on line " + std::to_string(line_no));
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
        mesh.triangles.push_back({poly[0], poly[k], poly[k + 1]});
      }
    }
  }
  validate(mesh);
  return mesh;
}

TriangleMesh parse_stl(std::string_view bytes) {
  if (bytes.size() >= 84) {
    std::uint32_t count = 0;
    std::memcpy(&count, bytes.data() + 80, sizeof(count));
    if (bytes.size() == 84 + 50 * static_cast<std::size_t>(count)) return parse_binary_stl(bytes);
  }
  if (bytes.substr(0, 5) == "solid") return parse_ascii_stl(bytes);
  throw MeshError("unrecognized STL encoding");
}

TriangleMesh load_mesh(const std::filesystem::path& path, double unit_scale) {
  if (!(unit_scale > 0.0) || !std::isfinite(unit_scale)) throw MeshError("unit scale must be positive");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MeshError("cannot read mesh file " + path.string());

  std::string ext = path.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));

  TriangleMesh mesh;
  if (ext == ".obj") {
    mesh = parse_obj(in);
  } else if (ext == ".stl") {
    std::ostringstream buf;
    buf << in.rdbuf();
    mesh = parse_stl(buf.str());
  } else {
    throw MeshError("unsupported mesh format '" + ext + "' (expected .obj or .stl)");
  }

  for (Vec3& v : mesh.vertices) v *= unit_scale;
  const std::size_t dropped = drop_degenerate_triangles(mesh);
  if (dropped > 0) {
    warn("dropped " + std::to_string(dropped) + " degenerate triangle(s) from " + path.string());
  }
  if (mesh.triangles.empty()) throw MeshError("mesh " + path.string() + " is empty after cleaning");
  return mesh;
}

void write_obj(const TriangleMesh& mesh, std::ostream& out) {
  out << std::setprecision(17);
  for (const Vec3& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const Triangle& t : mesh.triangles) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

double unit_scale_from_name(std::string_view unit) {
  if (unit == "m") return 1.0;
  if (unit == "cm") return 0.01;
  if (unit == "mm") return 0.001;
  throw MeshError("unknown unit '" + std::string(unit) + "' (expected m, cm or mm)");
}

TriangleMesh transformed(const TriangleMesh& mesh, double scale, const Vec3& offset) {
  TriangleMesh out = mesh;
  for (Vec3& v : out.vertices) v = scale * v + offset;
  return out;
}

std::uint64_t mesh_digest(const TriangleMesh& mesh) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  for (const Vec3& v : mesh.vertices) mix(v.data(), 3 * sizeof(double));
  for (const Triangle& t : mesh.triangles) mix(t.data(), sizeof(Triangle));
  return h;
}

}  // namespace fixpose
