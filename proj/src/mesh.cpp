#include "curltd/mesh.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace curltd {

const char* to_string(Error::Kind kind) {
  switch (kind) {
    case Error::Kind::Orientation: return "orientation error";
    case Error::Kind::Spec: return "spec error";
    case Error::Kind::Lookup: return "lookup error";
    case Error::Kind::Domain: return "domain error";
    case Error::Kind::Configuration: return "configuration error";
    case Error::Kind::Location: return "location error";
    case Error::Kind::Solver: return "solver error";
    case Error::Kind::NonConvergence: return "nonconvergence error";
    case Error::Kind::OutOfRange: return "out-of-range error";
    case Error::Kind::Resolution: return "resolution error";
    case Error::Kind::Resource: return "resource error";
    case Error::Kind::Io: return "io error";
    case Error::Kind::PartialTable: return "partial-table error";
  }
  return "error";
}

const char* to_string(Region r) {
  switch (r) {
    case Region::Air: return "air";
    case Region::Iron: return "iron";
    case Region::Magnet: return "magnet";
    case Region::AirGap: return "airgap";
    case Region::Inclusion: return "inclusion";
  }
  return "?";
}

Region region_from_int(int tag) {
  if (tag < 0 || tag >= kRegionCount) {
    throw Error(Error::Kind::Lookup, "unknown region tag " + std::to_string(tag));
  }
  return static_cast<Region>(tag);
}

Region region_from_string(const std::string& name) {
  for (int i = 0; i < kRegionCount; ++i) {
    if (name == to_string(static_cast<Region>(i))) return static_cast<Region>(i);
  }
  throw Error(Error::Kind::Lookup, "unknown region name '" + name + "'");
}

Vec3 Mesh::centroid(int t) const {
  const auto& tv = tets[t];
  return 0.25 * (vertices[tv[0]] + vertices[tv[1]] + vertices[tv[2]] + vertices[tv[3]]);
}

std::array<int, 3> Mesh::facet_vertices(const BoundaryFacet& f) const {
  const auto& tv = tets[f.tet];
  const auto& lf = kLocalFaces[f.face];
  return {tv[lf[0]], tv[lf[1]], tv[lf[2]]};
}

double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return (b - a).dot((c - a).cross(d - a)) / 6.0;
}

double tet_volume(const Mesh& mesh, int t) {
  const auto& tv = mesh.tets[t];
  return signed_volume(mesh.vertices[tv[0]], mesh.vertices[tv[1]], mesh.vertices[tv[2]],
                       mesh.vertices[tv[3]]);
}

double tet_diameter(const Mesh& mesh, int t) {
  const auto& tv = mesh.tets[t];
  double d = 0.0;
  for (const auto& le : kLocalEdges) {
    d = std::max(d, (mesh.vertices[tv[le[0]]] - mesh.vertices[tv[le[1]]]).norm());
  }
  return d;
}

Mesh build_edges(Mesh mesh) {
  const int nt = mesh.num_tets();
  for (int t = 0; t < nt; ++t) {
    for (int v : mesh.tets[t]) {
      if (v < 0 || v >= mesh.num_vertices()) {
        throw Error(Error::Kind::Spec, "tet " + std::to_string(t) + " references vertex " +
                                           std::to_string(v) + " out of range");
      }
    }
    if (!(tet_volume(mesh, t) > 0.0)) {
      throw Error(Error::Kind::Orientation,
                  "tet " + std::to_string(t) + " has non-positive volume");
    }
  }

  std::vector<std::array<int, 2>> pairs;
  pairs.reserve(static_cast<size_t>(nt) * 6);
  for (const auto& tv : mesh.tets) {
    for (const auto& le : kLocalEdges) {
      const int a = tv[le[0]];
      const int b = tv[le[1]];
      pairs.push_back({std::min(a, b), std::max(a, b)});
    }
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  mesh.tet_edges.assign(nt, {});
  for (int t = 0; t < nt; ++t) {
    const auto& tv = mesh.tets[t];
    for (int k = 0; k < 6; ++k) {
      const int a = tv[kLocalEdges[k][0]];
      const int b = tv[kLocalEdges[k][1]];
      const std::array<int, 2> key{std::min(a, b), std::max(a, b)};
      const auto it = std::lower_bound(pairs.begin(), pairs.end(), key);
      mesh.tet_edges[t][k] = {static_cast<int>(it - pairs.begin()), a < b ? 1 : -1};
    }
  }
  mesh.edges = std::move(pairs);
  return mesh;
}

namespace {

struct FacetKey {
  std::array<int, 3> v;
  int tet;
  int face;
};

std::vector<FacetKey> sorted_facets(const Mesh& mesh) {
  std::vector<FacetKey> keys;
  keys.reserve(static_cast<size_t>(mesh.num_tets()) * 4);
  for (int t = 0; t < mesh.num_tets(); ++t) {
    for (int f = 0; f < 4; ++f) {
      std::array<int, 3> v{mesh.tets[t][kLocalFaces[f][0]], mesh.tets[t][kLocalFaces[f][1]],
                           mesh.tets[t][kLocalFaces[f][2]]};
      std::sort(v.begin(), v.end());
      keys.push_back({v, t, f});
    }
  }
  std::sort(keys.begin(), keys.end(), [](const FacetKey& a, const FacetKey& b) {
    return a.v != b.v ? a.v < b.v : (a.tet != b.tet ? a.tet < b.tet : a.face < b.face);
  });
  return keys;
}

template <typename Fn>
void for_each_facet_group(const std::vector<FacetKey>& keys, Fn&& fn) {
  size_t i = 0;
  while (i < keys.size()) {
    size_t j = i + 1;
    while (j < keys.size() && keys[j].v == keys[i].v) ++j;
    fn(i, j);
    i = j;
  }
}

}  // namespace

std::vector<BoundaryFacet> exterior_facets(const Mesh& mesh, BoundaryTag tag) {
  std::vector<BoundaryFacet> out;
  const auto keys = sorted_facets(mesh);
  for_each_facet_group(keys, [&](size_t i, size_t j) {
    if (j - i == 1) out.push_back({keys[i].tet, keys[i].face, tag});
  });
  std::sort(out.begin(), out.end(), [](const BoundaryFacet& a, const BoundaryFacet& b) {
    return a.tet != b.tet ? a.tet < b.tet : a.face < b.face;
  });
  return out;
}

void check_facet_topology(const Mesh& mesh) {
  const auto keys = sorted_facets(mesh);
  std::map<std::pair<int, int>, bool> exterior;
  for_each_facet_group(keys, [&](size_t i, size_t j) {
    if (j - i > 2) {
      throw Error(Error::Kind::Spec, "facet shared by more than two tets (tet " +
                                         std::to_string(keys[i].tet) + ")");
    }
    if (j - i == 1) exterior[{keys[i].tet, keys[i].face}] = true;
  });
  for (const auto& bf : mesh.boundary_facets) {
    if (!exterior.count({bf.tet, bf.face})) {
      throw Error(Error::Kind::Spec, "boundary facet of tet " + std::to_string(bf.tet) +
                                         " is not exterior");
    }
  }
}

double volume(const Mesh& mesh, Region tag) {
  const int raw = static_cast<int>(tag);
  if (raw < 0 || raw >= kRegionCount) {
    throw Error(Error::Kind::Lookup, "unknown region tag " + std::to_string(raw));
  }
  const Region one[1] = {tag};
  return volume(mesh, std::span<const Region>(one));
}

double volume(const Mesh& mesh, std::span<const Region> tags) {
  double v = 0.0;
  for (int t = 0; t < mesh.num_tets(); ++t) {
    if (std::find(tags.begin(), tags.end(), mesh.region[t]) != tags.end()) {
      v += tet_volume(mesh, t);
    }
  }
  return v;
}

double total_volume(const Mesh& mesh) {
  double v = 0.0;
  for (int t = 0; t < mesh.num_tets(); ++t) v += tet_volume(mesh, t);
  return v;
}

std::vector<bool> dirichlet_vertices(const Mesh& mesh) {
  std::vector<bool> on(mesh.num_vertices(), false);
  for (const auto& bf : mesh.boundary_facets) {
    if (bf.tag != BoundaryTag::Dirichlet) continue;
    for (int v : mesh.facet_vertices(bf)) on[v] = true;
  }
  return on;
}

std::string fingerprint(const Mesh& mesh) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& v : mesh.vertices) mix(v.data(), 3 * sizeof(double));
  for (const auto& t : mesh.tets) mix(t.data(), 4 * sizeof(int));
  for (const auto r : mesh.region) {
    const int i = static_cast<int>(r);
    mix(&i, sizeof(int));
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

TetLocator::TetLocator(const Mesh& mesh) : mesh_(mesh) {
  neighbors_.assign(mesh.num_tets(), {-1, -1, -1, -1});
  const auto keys = sorted_facets(mesh);
  for_each_facet_group(keys, [&](size_t i, size_t j) {
    if (j - i == 2) {
      neighbors_[keys[i].tet][keys[i].face] = keys[i + 1].tet;
      neighbors_[keys[i + 1].tet][keys[i + 1].face] = keys[i].tet;
    }
  });
}

Eigen::Vector4d TetLocator::barycentric(int t, const Vec3& p) const {
  const auto& tv = mesh_.tets[t];
  const Vec3& x0 = mesh_.vertices[tv[0]];
  Mat3 m;
  m.col(0) = mesh_.vertices[tv[1]] - x0;
  m.col(1) = mesh_.vertices[tv[2]] - x0;
  m.col(2) = mesh_.vertices[tv[3]] - x0;
  const Vec3 l = m.partialPivLu().solve(p - x0);
  return {1.0 - l.sum(), l[0], l[1], l[2]};
}

int TetLocator::locate(const Vec3& p, int hint, double tol) const {
  const int nt = mesh_.num_tets();
  if (nt == 0) return -1;
  int t = (hint >= 0 && hint < nt) ? hint : 0;
  for (int step = 0; step < nt; ++step) {
    const Eigen::Vector4d b = barycentric(t, p);
    int worst = 0;
    b.minCoeff(&worst);
    if (b[worst] >= -tol) return t;
    const int next = neighbors_[t][worst];
    if (next < 0) break;
    t = next;
  }
  for (int s = 0; s < nt; ++s) {
    if (barycentric(s, p).minCoeff() >= -tol) return s;
  }
  return -1;
}

void write_mesh(std::ostream& os, const Mesh& mesh) {
  os << "tetmesh 1\n";
  os << "vertices " << mesh.num_vertices() << "\n";
  os << std::setprecision(17);
  for (const auto& v : mesh.vertices) os << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
  os << "tets " << mesh.num_tets() << "\n";
  for (int t = 0; t < mesh.num_tets(); ++t) {
    const auto& tv = mesh.tets[t];
    os << tv[0] << ' ' << tv[1] << ' ' << tv[2] << ' ' << tv[3] << ' '
       << static_cast<int>(mesh.region[t]) << '\n';
  }
  os << "bfacets " << mesh.boundary_facets.size() << "\n";
  for (const auto& bf : mesh.boundary_facets) {
    const auto fv = mesh.facet_vertices(bf);
    os << fv[0] << ' ' << fv[1] << ' ' << fv[2] << ' ' << static_cast<int>(bf.tag) << '\n';
  }
}

namespace {

void expect_word(std::istream& is, const std::string& word) {
  std::string got;
  if (!(is >> got) || got != word) {
    throw Error(Error::Kind::Io, "mesh file: expected '" + word + "', got '" + got + "'");
  }
}

}  // namespace

Mesh read_mesh(std::istream& is) {
  Mesh mesh;
  expect_word(is, "tetmesh");
  int version = 0;
  if (!(is >> version) || version != 1) throw Error(Error::Kind::Io, "mesh file: bad version");

  size_t n = 0;
  expect_word(is, "vertices");
  is >> n;
  mesh.vertices.resize(n);
  for (auto& v : mesh.vertices) is >> v[0] >> v[1] >> v[2];

  expect_word(is, "tets");
  is >> n;
  mesh.tets.resize(n);
  mesh.region.resize(n);
  for (size_t t = 0; t < n; ++t) {
    int tag = 0;
    is >> mesh.tets[t][0] >> mesh.tets[t][1] >> mesh.tets[t][2] >> mesh.tets[t][3] >> tag;
    mesh.region[t] = region_from_int(tag);
  }

  expect_word(is, "bfacets");
  is >> n;
  std::vector<std::pair<std::array<int, 3>, BoundaryTag>> facets(n);
  for (auto& [v, tag] : facets) {
    int raw = 0;
    is >> v[0] >> v[1] >> v[2] >> raw;
    if (raw != 0 && raw != 1) throw Error(Error::Kind::Io, "mesh file: bad boundary tag");
    tag = static_cast<BoundaryTag>(raw);
    std::sort(v.begin(), v.end());
  }
  if (!is) throw Error(Error::Kind::Io, "mesh file: truncated");

  mesh = build_edges(std::move(mesh));

  std::map<std::array<int, 3>, std::pair<int, int>> lookup;
  for (int t = 0; t < mesh.num_tets(); ++t) {
    for (int f = 0; f < 4; ++f) {
      std::array<int, 3> v{mesh.tets[t][kLocalFaces[f][0]], mesh.tets[t][kLocalFaces[f][1]],
                           mesh.tets[t][kLocalFaces[f][2]]};
      std::sort(v.begin(), v.end());
      lookup.emplace(v, std::make_pair(t, f));
    }
  }
  for (const auto& [v, tag] : facets) {
    const auto it = lookup.find(v);
    if (it == lookup.end()) throw Error(Error::Kind::Io, "mesh file: facet not in any tet");
    mesh.boundary_facets.push_back({it->second.first, it->second.second, tag});
  }
  return mesh;
}

void write_mesh_file(const std::string& path, const Mesh& mesh) {
  std::ofstream os(path);
  if (!os) throw Error(Error::Kind::Io, "cannot open '" + path + "' for writing");
  write_mesh(os, mesh);
}

Mesh read_mesh_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(Error::Kind::Io, "mesh not found: '" + path + "'");
  return read_mesh(is);
}

}  // namespace curltd
