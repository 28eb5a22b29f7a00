#include "gamma_elliptic/surface_mesh.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>

#include "gamma_elliptic/errors.hpp"

namespace gamma_elliptic {

namespace {

std::atomic<std::uint64_t> next_mesh_id{1};

std::uint64_t edge_key(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

Point3 to_point(const Vector& v) { return Point3(v[0], v[1], v[2]); }

Vector to_vector(const Point3& p) { return Vector{{p[0], p[1], p[2]}}; }

}  // namespace

SurfaceMesh::SurfaceMesh(std::vector<Point3> vertices, std::vector<Triangle> triangles)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)), id_(next_mesh_id++) {
  const int nv = static_cast<int>(vertices_.size());
  if (triangles_.empty()) throw MeshError("mesh has no triangles");

  // Directed edge -> owning triangle; closedness and orientation follow
  // from every directed edge appearing once with its reverse present.
  std::unordered_map<std::uint64_t, int> directed;
  directed.reserve(triangles_.size() * 3);
  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    const auto& tri = triangles_[t];
    for (int k = 0; k < 3; ++k) {
      const int a = tri[k];
      const int b = tri[(k + 1) % 3];
      if (a < 0 || a >= nv || b < 0 || b >= nv) throw MeshError("triangle references a missing vertex");
      if (a == b) throw MeshError("triangle repeats a vertex");
      if (!directed.emplace(edge_key(a, b), static_cast<int>(t)).second) {
        throw MeshError("edge traversed twice in the same direction (inconsistent orientation or non-manifold edge)");
      }
    }
  }
  edges_.reserve(directed.size() / 2);
  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    const auto& tri = triangles_[t];
    for (int k = 0; k < 3; ++k) {
      const int a = tri[k];
      const int b = tri[(k + 1) % 3];
      const auto twin = directed.find(edge_key(b, a));
      if (twin == directed.end()) throw MeshError("boundary edge found; mesh is not closed");
      if (a < b) edges_.push_back(EdgeInfo{a, b, {static_cast<int>(t), twin->second}});
    }
  }

  const double scale = bounding_box_diagonal();
  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    const auto& tri = triangles_[t];
    const Point3 e1 = vertices_[tri[1]] - vertices_[tri[0]];
    const Point3 e2 = vertices_[tri[2]] - vertices_[tri[0]];
    if (0.5 * e1.cross(e2).norm() < 1e-14 * scale * scale) {
      throw MeshError("degenerate triangle " + std::to_string(t));
    }
  }
}

int SurfaceMesh::euler_characteristic() const {
  return static_cast<int>(vertices_.size()) - static_cast<int>(edges_.size()) +
         static_cast<int>(triangles_.size());
}

double SurfaceMesh::total_area() const {
  double area = 0.0;
  for (const auto& tri : triangles_) {
    area += 0.5 * (vertices_[tri[1]] - vertices_[tri[0]]).cross(vertices_[tri[2]] - vertices_[tri[0]]).norm();
  }
  return area;
}

double SurfaceMesh::enclosed_volume() const {
  double volume = 0.0;
  for (const auto& tri : triangles_) {
    volume += vertices_[tri[0]].dot(vertices_[tri[1]].cross(vertices_[tri[2]])) / 6.0;
  }
  return volume;
}

double SurfaceMesh::bounding_box_diagonal() const {
  Point3 lo = vertices_.front();
  Point3 hi = vertices_.front();
  for (const auto& v : vertices_) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return (hi - lo).norm();
}

ElementGeometry element_geometry(const SurfaceMesh& mesh, std::size_t triangle) {
  if (triangle >= mesh.triangle_count()) throw ContractError("element_geometry: triangle index out of range");
  const auto& tri = mesh.triangles()[triangle];
  const auto& v = mesh.vertices();
  const Point3& x0 = v[tri[0]];
  const Point3& x1 = v[tri[1]];
  const Point3& x2 = v[tri[2]];
  const Point3 cross = (x1 - x0).cross(x2 - x0);
  const double twice_area = cross.norm();
  if (!(twice_area > 0.0)) throw MeshError("element_geometry: degenerate triangle");
  ElementGeometry g;
  g.area = 0.5 * twice_area;
  g.normal = cross / twice_area;
  // grad phi_i = n x (edge opposite i, counter-clockwise) / (2 |T|)
  g.gradients[0] = g.normal.cross(x2 - x1) / twice_area;
  g.gradients[1] = g.normal.cross(x0 - x2) / twice_area;
  g.gradients[2] = g.normal.cross(x1 - x0) / twice_area;
  return g;
}

MeshPreset parse_mesh_preset(const std::string& name) {
  if (name == "sphere-icosahedral" || name == "sphere") return MeshPreset::SphereIcosahedral;
  if (name == "torus-grid" || name == "torus") return MeshPreset::TorusGrid;
  throw ContractError("unknown mesh preset '" + name + "'");
}

std::string to_string(MeshPreset preset) {
  return preset == MeshPreset::SphereIcosahedral ? "sphere-icosahedral" : "torus-grid";
}

SurfaceMesh build_icosphere(const Atlas& atlas, int subdivisions) {
  if (subdivisions < 0) throw ContractError("subdivision count must be non-negative");
  const double phi = 0.5 * (1.0 + std::sqrt(5.0));
  std::vector<Point3> raw;
  for (double s1 : {-1.0, 1.0}) {
    for (double s2 : {-1.0, 1.0}) {
      raw.emplace_back(0.0, s1, s2 * phi);
      raw.emplace_back(s1, s2 * phi, 0.0);
      raw.emplace_back(s2 * phi, 0.0, s1);
    }
  }
  // Faces are the vertex triples at mutual distance 2 (the edge length).
  std::vector<Triangle> faces;
  const auto n = static_cast<int>(raw.size());
  auto adjacent = [&](int a, int b) { return std::abs((raw[a] - raw[b]).norm() - 2.0) < 1e-9; };
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      if (!adjacent(a, b)) continue;
      for (int c = b + 1; c < n; ++c) {
        if (!adjacent(a, c) || !adjacent(b, c)) continue;
        const Point3 normal = (raw[b] - raw[a]).cross(raw[c] - raw[a]);
        if (normal.dot(raw[a] + raw[b] + raw[c]) > 0.0) {
          faces.push_back({a, b, c});
        } else {
          faces.push_back({a, c, b});
        }
      }
    }
  }
  std::vector<Point3> vertices;
  vertices.reserve(raw.size());
  for (const auto& p : raw) vertices.push_back(to_point(atlas.project(to_vector(p))));
  SurfaceMesh mesh(std::move(vertices), std::move(faces));
  for (int level = 0; level < subdivisions; ++level) mesh = refine(mesh, atlas);
  return mesh;
}

SurfaceMesh build_periodic_grid(const Atlas& atlas, int n, int m) {
  if (n < 3 || m < 3) throw ContractError("periodic grid needs at least 3 x 3 cells");
  const Chart& chart = atlas.chart(0);
  const auto& box = chart.box();
  if (chart.dimension() != 2 || !box.periodic[0] || !box.periodic[1]) {
    throw MeshError("periodic grid requires a doubly periodic two-dimensional chart");
  }
  std::vector<Point3> vertices;
  vertices.reserve(static_cast<std::size_t>(n * m));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      const Vector y{{box.lower[0] + (box.upper[0] - box.lower[0]) * i / n,
                      box.lower[1] + (box.upper[1] - box.lower[1]) * j / m}};
      vertices.push_back(to_point(chart.point(y)));
    }
  }
  auto id = [m, n](int i, int j) { return ((i % n + n) % n) * m + ((j % m + m) % m); };
  std::vector<Triangle> triangles;
  triangles.reserve(static_cast<std::size_t>(2 * n * m));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  // Flip everything if the first triangle disagrees with the chart normal.
  const Vector y0 = chart.box().lower;
  const Point3 normal = to_point(unit_normal(chart, y0));
  const auto& t0 = triangles.front();
  const Point3 area = (vertices[t0[1]] - vertices[t0[0]]).cross(vertices[t0[2]] - vertices[t0[0]]);
  if (area.dot(normal) < 0.0) {
    for (auto& t : triangles) std::swap(t[1], t[2]);
  }
  return SurfaceMesh(std::move(vertices), std::move(triangles));
}

SurfaceMesh build_mesh(const Atlas& atlas, MeshPreset preset, int resolution) {
  switch (preset) {
    case MeshPreset::SphereIcosahedral:
      return build_icosphere(atlas, resolution);
    case MeshPreset::TorusGrid:
      if (resolution < 1) throw ContractError("torus-grid resolution must be at least 1");
      return build_periodic_grid(atlas, 4 * resolution, 12 * resolution);
  }
  throw ContractError("unknown mesh preset");
}

SurfaceMesh refine(const SurfaceMesh& mesh, const Atlas& atlas) {
  std::vector<Point3> vertices = mesh.vertices();
  vertices.reserve(mesh.vertex_count() + mesh.edge_count());
  std::unordered_map<std::uint64_t, int> midpoint;
  midpoint.reserve(mesh.edge_count());
  for (const auto& e : mesh.edges()) {
    const Point3 mid = 0.5 * (vertices[e.v0] + vertices[e.v1]);
    Vector projected;
    try {
      projected = atlas.project(to_vector(mid));
    } catch (const Error& err) {
      throw MeshError(std::string("refine: projector failed at an edge midpoint: ") + err.what());
    }
    midpoint.emplace(edge_key(e.v0, e.v1), static_cast<int>(vertices.size()));
    vertices.push_back(to_point(projected));
  }
  auto mid = [&](int a, int b) { return midpoint.at(edge_key(std::min(a, b), std::max(a, b))); };
  std::vector<Triangle> triangles;
  triangles.reserve(4 * mesh.triangle_count());
  for (const auto& t : mesh.triangles()) {
    const int ab = mid(t[0], t[1]);
    const int bc = mid(t[1], t[2]);
    const int ca = mid(t[2], t[0]);
    triangles.push_back({t[0], ab, ca});
    triangles.push_back({ab, t[1], bc});
    triangles.push_back({ca, bc, t[2]});
    triangles.push_back({ab, bc, ca});
  }
  return SurfaceMesh(std::move(vertices), std::move(triangles));
}

double mesh_size(const SurfaceMesh& mesh) {
  double h = 0.0;
  const auto& v = mesh.vertices();
  for (const auto& e : mesh.edges()) h = std::max(h, (v[e.v0] - v[e.v1]).norm());
  return h;
}

}  // namespace gamma_elliptic
