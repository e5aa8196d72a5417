#pragma once

#include "curltd/mesh.hpp"

#include <string>
#include <utility>
#include <vector>

namespace curltd {

/// Fields attached to a legacy VTK unstructured grid.
struct VtkFields {
  std::vector<std::pair<std::string, VecX>> point_scalars;
  std::vector<std::pair<std::string, VecX>> cell_scalars;
  std::vector<std::pair<std::string, std::vector<Vec3>>> cell_vectors;
};

/// ASCII legacy VTK (version 3.0), tets as cell type 10. The region tag is
/// always written as the integer cell field "region".
void write_vtk(const std::string& path, const Mesh& mesh, const VtkFields& fields = {});

}  // namespace curltd
