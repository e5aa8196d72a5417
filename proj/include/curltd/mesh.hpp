#pragma once

#include "curltd/types.hpp"

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace curltd {

enum class Region : int { Air = 0, Iron = 1, Magnet = 2, AirGap = 3, Inclusion = 4 };
inline constexpr int kRegionCount = 5;

enum class BoundaryTag : int { Natural = 0, Dirichlet = 1 };

const char* to_string(Region r);
Region region_from_int(int tag);
Region region_from_string(const std::string& name);

/// Local edge k of a tetrahedron joins local vertices kLocalEdges[k][0] -> [1].
inline constexpr std::array<std::array<int, 2>, 6> kLocalEdges{
    {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

/// Local face f is the face opposite local vertex f.
inline constexpr std::array<std::array<int, 3>, 4> kLocalFaces{
    {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}}};

struct EdgeRef {
  int index = -1;
  int sign = 1;  // +1 iff local direction matches the global (ascending) one
};

struct BoundaryFacet {
  int tet = -1;
  int face = -1;
  BoundaryTag tag = BoundaryTag::Dirichlet;
};

/// Tetrahedral mesh. Vertices in meters; tets positively oriented.
/// Treated as immutable once `build_edges` has run.
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 4>> tets;
  std::vector<Region> region;
  std::vector<BoundaryFacet> boundary_facets;

  std::vector<std::array<int, 2>> edges;
  std::vector<std::array<EdgeRef, 6>> tet_edges;

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_tets() const { return static_cast<int>(tets.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }

  Vec3 centroid(int t) const;
  std::array<int, 3> facet_vertices(const BoundaryFacet& f) const;
};

double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);
double tet_volume(const Mesh& mesh, int t);
double tet_diameter(const Mesh& mesh, int t);

/// Fills `edges` (lexicographically sorted, v0 < v1) and `tet_edges`.
/// Throws Error::Orientation naming the first tet with volume <= 0.
Mesh build_edges(Mesh mesh);

/// Facets that belong to exactly one tet, tagged with `tag`.
std::vector<BoundaryFacet> exterior_facets(const Mesh& mesh, BoundaryTag tag);

/// Checks facet sharing (interior facets twice, boundary facets once) and
/// that every boundary facet in the list is exterior. Throws Error::Spec.
void check_facet_topology(const Mesh& mesh);

double volume(const Mesh& mesh, Region tag);
double volume(const Mesh& mesh, std::span<const Region> tags);
double total_volume(const Mesh& mesh);

/// Vertices lying on a DIRICHLET boundary facet.
std::vector<bool> dirichlet_vertices(const Mesh& mesh);

/// Stable content hash (vertices, tets, regions) as 16 hex digits.
std::string fingerprint(const Mesh& mesh);

/// Point location by walking through face neighbours with a linear-scan
/// fallback. Holds a reference to the mesh.
class TetLocator {
 public:
  explicit TetLocator(const Mesh& mesh);

  /// Index of a tet containing `p` (barycentric tolerance `tol`), or -1.
  int locate(const Vec3& p, int hint = -1, double tol = 1e-10) const;

  Eigen::Vector4d barycentric(int t, const Vec3& p) const;

  const std::vector<std::array<int, 4>>& neighbors() const { return neighbors_; }

 private:
  const Mesh& mesh_;
  std::vector<std::array<int, 4>> neighbors_;  // across local face f, -1 on boundary
};

// ASCII "tetmesh 1" format.
void write_mesh(std::ostream& os, const Mesh& mesh);
Mesh read_mesh(std::istream& is);
void write_mesh_file(const std::string& path, const Mesh& mesh);
Mesh read_mesh_file(const std::string& path);

}  // namespace curltd
