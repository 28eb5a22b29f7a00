#include "gamma_elliptic/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "gamma_elliptic/errors.hpp"

namespace gamma_elliptic {

namespace {

std::ofstream open_for_writing(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.precision(17);
  return out;
}

}  // namespace

void write_vtk(const std::filesystem::path& path, const SurfaceMesh& mesh,
               const PointData& point_data) {
  auto out = open_for_writing(path);
  out << "# vtk DataFile Version 3.0\n"
      << "gamma-elliptic surface mesh\n"
      << "ASCII\n"
      << "DATASET POLYDATA\n"
      << "POINTS " << mesh.vertex_count() << " double\n";
  for (const auto& v : mesh.vertices()) out << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
  out << "POLYGONS " << mesh.triangle_count() << ' ' << 4 * mesh.triangle_count() << '\n';
  for (const auto& t : mesh.triangles()) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  if (point_data.empty()) return;
  out << "POINT_DATA " << mesh.vertex_count() << '\n';
  for (const auto& [name, values] : point_data) {
    if (static_cast<std::size_t>(values.size()) != mesh.vertex_count()) {
      throw ContractError("write_vtk: point data '" + name + "' has the wrong length");
    }
    out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (Eigen::Index i = 0; i < values.size(); ++i) out << values[i] << '\n';
  }
}

void write_mesh_csv(const std::filesystem::path& stem, const SurfaceMesh& mesh) {
  auto vertices = open_for_writing(stem.string() + "_vertices.csv");
  vertices << "index,x,y,z\n";
  for (std::size_t i = 0; i < mesh.vertex_count(); ++i) {
    const auto& v = mesh.vertices()[i];
    vertices << i << ',' << v[0] << ',' << v[1] << ',' << v[2] << '\n';
  }
  auto triangles = open_for_writing(stem.string() + "_triangles.csv");
  triangles << "index,v0,v1,v2\n";
  for (std::size_t i = 0; i < mesh.triangle_count(); ++i) {
    const auto& t = mesh.triangles()[i];
    triangles << i << ',' << t[0] << ',' << t[1] << ',' << t[2] << '\n';
  }
}

void write_matrix_market(const std::filesystem::path& path,
                         const Eigen::SparseMatrix<double, Eigen::RowMajor>& matrix) {
  auto out = open_for_writing(path);
  out << "%%MatrixMarket matrix coordinate real general\n"
      << matrix.rows() << ' ' << matrix.cols() << ' ' << matrix.nonZeros() << '\n';
  for (Eigen::Index r = 0; r < matrix.outerSize(); ++r) {
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(matrix, r); it; ++it) {
      out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
    }
  }
}

void write_matrix_market(const std::filesystem::path& path, const Eigen::VectorXd& vector) {
  auto out = open_for_writing(path);
  out << "%%MatrixMarket matrix array real general\n" << vector.size() << " 1\n";
  for (Eigen::Index i = 0; i < vector.size(); ++i) out << vector[i] << '\n';
}

Eigen::SparseMatrix<double, Eigen::RowMajor> read_matrix_market(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  const bool coordinate = line.rfind("%%MatrixMarket matrix coordinate real", 0) == 0;
  if (!coordinate && line.rfind("%%MatrixMarket matrix array real", 0) != 0) {
    throw Error("'" + path.string() + "' is not a real Matrix Market file");
  }
  while (std::getline(in, line) && !line.empty() && line[0] == '%') {
  }
  std::istringstream header(line);
  Eigen::Index rows = 0, cols = 0, nnz = 0;
  header >> rows >> cols >> nnz;
  std::vector<Eigen::Triplet<double>> triplets;
  if (!coordinate) {
    // Dense column-major listing; zeros are dropped.
    for (Eigen::Index c = 0; c < cols; ++c) {
      for (Eigen::Index r = 0; r < rows; ++r) {
        double v = 0.0;
        if (!(in >> v)) throw Error("truncated Matrix Market file '" + path.string() + "'");
        if (v != 0.0) triplets.emplace_back(static_cast<int>(r), static_cast<int>(c), v);
      }
    }
    nnz = 0;
  }
  triplets.reserve(static_cast<std::size_t>(nnz));
  for (Eigen::Index k = 0; k < nnz; ++k) {
    Eigen::Index r = 0, c = 0;
    double v = 0.0;
    if (!(in >> r >> c >> v)) throw Error("truncated Matrix Market file '" + path.string() + "'");
    triplets.emplace_back(static_cast<int>(r - 1), static_cast<int>(c - 1), v);
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> m(rows, cols);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

}  // namespace gamma_elliptic
