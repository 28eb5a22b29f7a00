#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "gamma_elliptic/geometry.hpp"

namespace gamma_elliptic {

using Point3 = Eigen::Vector3d;
using Triangle = std::array<int, 3>;

/// Closed, consistently oriented triangulation of a surface in R^3.
///
/// The constructor validates the invariants: every undirected edge is shared
/// by exactly two triangles which traverse it in opposite directions, and
/// no triangle has area below 1e-14 * (bounding-box diagonal)^2. Meshes are
/// immutable; refine() returns a new mesh. Each mesh carries a process-wide
/// unique id so that discrete fields can be matched to the mesh they live on.
class SurfaceMesh {
 public:
  struct EdgeInfo {
    int v0;  // v0 < v1
    int v1;
    std::array<int, 2> triangles;
  };

  SurfaceMesh(std::vector<Point3> vertices, std::vector<Triangle> triangles);

  const std::vector<Point3>& vertices() const { return vertices_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const std::vector<EdgeInfo>& edges() const { return edges_; }

  std::size_t vertex_count() const { return vertices_.size(); }
  std::size_t triangle_count() const { return triangles_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  int euler_characteristic() const;

  std::uint64_t id() const { return id_; }
  double total_area() const;
  // Signed enclosed volume; positive for outward orientation.
  double enclosed_volume() const;
  double bounding_box_diagonal() const;

 private:
  std::vector<Point3> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<EdgeInfo> edges_;
  std::uint64_t id_;
};

/// Per-triangle data for P1 assembly on the flat element.
struct ElementGeometry {
  double area = 0.0;
  Point3 normal = Point3::Zero();
  // Gradients of the three hat functions; tangent to the element plane.
  std::array<Point3, 3> gradients{};
};

ElementGeometry element_geometry(const SurfaceMesh& mesh, std::size_t triangle);

enum class MeshPreset { SphereIcosahedral, TorusGrid };

MeshPreset parse_mesh_preset(const std::string& name);
std::string to_string(MeshPreset preset);

// Sphere: `resolution` midpoint subdivisions of the icosahedron (0 allowed).
// Torus: a (4 resolution) x (12 resolution) grid over the doubly periodic chart.
SurfaceMesh build_mesh(const Atlas& atlas, MeshPreset preset, int resolution);
SurfaceMesh build_icosphere(const Atlas& atlas, int subdivisions);
// n x m structured grid over the first chart of the atlas (both axes periodic).
SurfaceMesh build_periodic_grid(const Atlas& atlas, int n, int m);

// Splits every triangle into four at the edge midpoints, which are moved
// onto the surface by the atlas projector.
SurfaceMesh refine(const SurfaceMesh& mesh, const Atlas& atlas);

// Longest edge length.
double mesh_size(const SurfaceMesh& mesh);

}  // namespace gamma_elliptic
