#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <Eigen/Sparse>

#include "gamma_elliptic/surface_mesh.hpp"

namespace gamma_elliptic {

using PointData = std::map<std::string, Eigen::VectorXd>;

// VTK legacy ASCII, DATASET POLYDATA with triangle polygons and optional
// per-vertex scalars.
void write_vtk(const std::filesystem::path& path, const SurfaceMesh& mesh,
               const PointData& point_data = {});

// <stem>_vertices.csv (index,x,y,z) and <stem>_triangles.csv (index,v0,v1,v2).
void write_mesh_csv(const std::filesystem::path& stem, const SurfaceMesh& mesh);

// Matrix Market coordinate real general, 1-based indices.
void write_matrix_market(const std::filesystem::path& path,
                         const Eigen::SparseMatrix<double, Eigen::RowMajor>& matrix);
// Matrix Market array real general (a single column).
void write_matrix_market(const std::filesystem::path& path, const Eigen::VectorXd& vector);

// Reads either layout back; array files give an n x 1 matrix.
Eigen::SparseMatrix<double, Eigen::RowMajor> read_matrix_market(const std::filesystem::path& path);

}  // namespace gamma_elliptic
