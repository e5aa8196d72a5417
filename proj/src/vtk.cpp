#include "curltd/vtk.hpp"

#include <fstream>
#include <iomanip>

namespace curltd {

namespace {

void check_size(const std::string& name, std::size_t got, std::size_t want) {
  if (got != want) throw Error(Error::Kind::Configuration, "vtk field '" + name + "' has the wrong length");
}

}  // namespace

void write_vtk(const std::string& path, const Mesh& mesh, const VtkFields& fields) {
  const std::size_t nv = mesh.vertices.size(), nt = mesh.tets.size();
  for (const auto& [name, v] : fields.point_scalars) check_size(name, v.size(), nv);
  for (const auto& [name, v] : fields.cell_scalars) check_size(name, v.size(), nt);
  for (const auto& [name, v] : fields.cell_vectors) check_size(name, v.size(), nt);

  std::ofstream os(path);
  if (!os) throw Error(Error::Kind::Io, "cannot write " + path);
  os << std::setprecision(12);
  os << "# vtk DataFile Version 3.0\ncurltd\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << nv << " double\n";
  for (const auto& p : mesh.vertices) os << p[0] << ' ' << p[1] << ' ' << p[2] << '\n';
  os << "CELLS " << nt << ' ' << 5 * nt << '\n';
  for (const auto& t : mesh.tets) os << "4 " << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
  os << "CELL_TYPES " << nt << '\n';
  for (std::size_t t = 0; t < nt; ++t) os << "10\n";

  os << "CELL_DATA " << nt << "\nSCALARS region int 1\nLOOKUP_TABLE default\n";
  for (auto r : mesh.region) os << static_cast<int>(r) << '\n';
  for (const auto& [name, v] : fields.cell_scalars) {
    os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (double x : v) os << x << '\n';
  }
  for (const auto& [name, v] : fields.cell_vectors) {
    os << "VECTORS " << name << " double\n";
    for (const auto& x : v) os << x[0] << ' ' << x[1] << ' ' << x[2] << '\n';
  }
  if (!fields.point_scalars.empty()) {
    os << "POINT_DATA " << nv << '\n';
    for (const auto& [name, v] : fields.point_scalars) {
      os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (double x : v) os << x << '\n';
    }
  }
  if (!os) throw Error(Error::Kind::Io, "write failed: " + path);
}

}  // namespace curltd
