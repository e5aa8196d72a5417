#include "curltd/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace curltd {

const char* to_string(GeometryKind k) {
  switch (k) {
    case GeometryKind::Box: return "box";
    case GeometryKind::ToyMotor: return "toy-motor";
    case GeometryKind::GradedBall: return "graded-ball";
    case GeometryKind::InclusionBox: return "inclusion-box";
  }
  return "?";
}

GeometryKind geometry_kind_from_string(const std::string& name) {
  for (auto k : {GeometryKind::Box, GeometryKind::ToyMotor, GeometryKind::GradedBall,
                 GeometryKind::InclusionBox}) {
    if (name == to_string(k)) return k;
  }
  throw Error(Error::Kind::Spec, "unknown geometry kind '" + name + "'");
}

namespace {

[[noreturn]] void spec_error(const std::string& msg) { throw Error(Error::Kind::Spec, msg); }

int cells_for(double length, double h) {
  return std::max(1, static_cast<int>(std::ceil(length / h - 1e-9)));
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> x(n + 1);
  for (int i = 0; i <= n; ++i) x[i] = a + (b - a) * static_cast<double>(i) / n;
  x[n] = b;
  return x;
}

// Splits a hexahedron into the six Kuhn tets sharing the diagonal
// hex[0][0][0] -> hex[1][1][1], fixing the orientation of each tet.
void emit_kuhn(Mesh& mesh, const int (&hex)[2][2][2]) {
  static constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                      {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (const auto& p : perms) {
    int c[3] = {0, 0, 0};
    std::array<int, 4> tet{};
    tet[0] = hex[0][0][0];
    for (int s = 0; s < 3; ++s) {
      c[p[s]] = 1;
      tet[s + 1] = hex[c[0]][c[1]][c[2]];
    }
    const double v = signed_volume(mesh.vertices[tet[0]], mesh.vertices[tet[1]],
                                   mesh.vertices[tet[2]], mesh.vertices[tet[3]]);
    if (v < 0.0) std::swap(tet[2], tet[3]);
    mesh.tets.push_back(tet);
  }
}

// Kuhn triangulation of a tensor grid. Along each reflected axis the diagonal
// of every cell points away from the grid's mid-plane, so the triangulation
// is symmetric under the corresponding mirror.
Mesh tensor_kuhn(const std::vector<double>& xs, const std::vector<double>& ys,
                 const std::vector<double>& zs, std::array<bool, 3> reflect) {
  Mesh mesh;
  const int nx = static_cast<int>(xs.size()) - 1;
  const int ny = static_cast<int>(ys.size()) - 1;
  const int nz = static_cast<int>(zs.size()) - 1;
  auto vid = [&](int i, int j, int k) { return (k * (ny + 1) + j) * (nx + 1) + i; };
  mesh.vertices.reserve(static_cast<size_t>(nx + 1) * (ny + 1) * (nz + 1));
  for (int k = 0; k <= nz; ++k)
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i <= nx; ++i) mesh.vertices.emplace_back(xs[i], ys[j], zs[k]);

  const int n[3] = {nx, ny, nz};
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const int lo[3] = {i, j, k};
        bool flip[3];
        for (int a = 0; a < 3; ++a) flip[a] = reflect[a] && (2 * lo[a] + 1 < n[a]);
        int hex[2][2][2];
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c) {
              const int ii = i + (flip[0] ? 1 - a : a);
              const int jj = j + (flip[1] ? 1 - b : b);
              const int kk = k + (flip[2] ? 1 - c : c);
              hex[a][b][c] = vid(ii, jj, kk);
            }
        emit_kuhn(mesh, hex);
      }
    }
  }
  return mesh;
}

Mesh finalize(Mesh mesh) {
  mesh = build_edges(std::move(mesh));
  mesh.boundary_facets = exterior_facets(mesh, BoundaryTag::Dirichlet);
  return mesh;
}

Mesh generate_box(const GeometrySpec& spec) {
  int n[3];
  for (int a = 0; a < 3; ++a) {
    n[a] = spec.cells[a] > 0 ? spec.cells[a] : cells_for(spec.extents[a], spec.h);
  }
  Mesh mesh = tensor_kuhn(linspace(0, spec.extents[0], n[0]), linspace(0, spec.extents[1], n[1]),
                          linspace(0, spec.extents[2], n[2]), {true, true, true});
  mesh.region.assign(mesh.tets.size(), Region::Air);
  return finalize(std::move(mesh));
}

Mesh generate_toy_motor(const GeometrySpec& spec) {
  const auto& l = spec.layout;
  const double breaks[5] = {0.0, l.bottom_air, l.bottom_air + l.magnet,
                            l.bottom_air + l.magnet + l.air_gap,
                            l.bottom_air + l.magnet + l.air_gap + l.design};
  const Region slab_region[5] = {Region::Air, Region::Magnet, Region::AirGap, Region::Iron,
                                 Region::Air};
  std::vector<double> ys{0.0};
  std::vector<double> slab_top;
  for (int s = 0; s < 5; ++s) {
    const double lo = breaks[s];
    const double hi = s < 4 ? breaks[s + 1] : spec.extents[1];
    slab_top.push_back(hi);
    if (hi - lo <= 0.0) continue;
    const auto seg = linspace(lo, hi, cells_for(hi - lo, spec.h));
    ys.insert(ys.end(), seg.begin() + 1, seg.end());
  }
  auto even = [](int c) { return c + (c % 2); };
  const int nx = even(cells_for(spec.extents[0], spec.h));
  const int nz = even(cells_for(spec.extents[2], spec.h));
  Mesh mesh = tensor_kuhn(linspace(0, spec.extents[0], nx), ys,
                          linspace(0, spec.extents[2], nz), {true, false, true});
  mesh.region.resize(mesh.tets.size());
  for (int t = 0; t < mesh.num_tets(); ++t) {
    const double y = mesh.centroid(t)[1];
    int s = 0;
    while (s < 4 && y > slab_top[s]) ++s;
    mesh.region[t] = slab_region[s];
  }
  return finalize(std::move(mesh));
}

// Cube-surface parametrisation: componentwise equiangular warp with exact
// +-1 at the cube faces, so that shared edges and corners agree bitwise.
double warp(double t) {
  if (t >= 1.0) return 1.0;
  if (t <= -1.0) return -1.0;
  const double w = std::tan(0.25 * std::numbers::pi * std::abs(t));
  return t < 0.0 ? -w : w;
}

double shell_outer_radius(const GeometrySpec& spec) {
  return spec.kind == GeometryKind::InclusionBox ? 0.5 * spec.extents[0] : spec.outer_radius;
}

// Radii of the shell interfaces, r_in first: geometric growth from the core
// spacing, rescaled so that the last one lands on the outer radius.
std::vector<double> shell_radii(const GeometrySpec& spec) {
  const int n = core_resolution(spec);
  const double r_in = spec.inclusion_radius;
  const double r_out = shell_outer_radius(spec);
  std::vector<double> radii{r_in};
  double d = r_in / n * spec.grading;
  while (radii.back() < r_out) {
    radii.push_back(radii.back() + d);
    d *= spec.grading;
  }
  const double stretch = (r_out - r_in) / (radii.back() - r_in);
  for (auto& r : radii) r = r_in + (r - r_in) * stretch;
  radii.back() = r_out;
  return radii;
}

// Shell mesh: a cubic lattice core [-n,n]^3 mapped onto the ball of radius
// r_in (each |.|_inf level set onto a sphere), surrounded by geometrically
// graded shells that each repeat the core's surface lattice. Every cell is
// Kuhn-split with its diagonal pointing away from the center, which keeps
// the mesh invariant under the 48 symmetries of the cube.
Mesh generate_shells(const GeometrySpec& spec, bool box_outer) {
  const int n = core_resolution(spec);
  const double r_in = spec.inclusion_radius;
  const double r_out = box_outer ? 0.5 * spec.extents[0] : spec.outer_radius;

  const std::vector<double> radii = shell_radii(spec);
  const int shells = static_cast<int>(radii.size()) - 1;

  Mesh mesh;
  const int m = 2 * n + 1;
  auto core_id = [&](int i, int j, int k) { return ((k + n) * m + (j + n)) * m + (i + n); };
  auto direction = [&](const Vec3& logical) {
    const Vec3 c(warp(logical[0]), warp(logical[1]), warp(logical[2]));
    return Vec3(c / c.norm());
  };
  auto cube_point = [&](const Vec3& logical) {
    return Vec3(warp(logical[0]), warp(logical[1]), warp(logical[2]));
  };

  for (int k = -n; k <= n; ++k)
    for (int j = -n; j <= n; ++j)
      for (int i = -n; i <= n; ++i) {
        const int rho = std::max({std::abs(i), std::abs(j), std::abs(k)});
        if (rho == 0) {
          mesh.vertices.push_back(spec.center);
          continue;
        }
        const Vec3 logical = Vec3(i, j, k) / rho;
        mesh.vertices.push_back(spec.center + r_in * (static_cast<double>(rho) / n) *
                                                  direction(logical));
      }

  // Surface lattice of the core cube.
  std::map<std::array<int, 3>, int> surface;
  std::vector<std::array<int, 3>> surface_pts;
  for (int k = -n; k <= n; ++k)
    for (int j = -n; j <= n; ++j)
      for (int i = -n; i <= n; ++i)
        if (std::max({std::abs(i), std::abs(j), std::abs(k)}) == n) {
          surface.emplace(std::array<int, 3>{i, j, k}, static_cast<int>(surface_pts.size()));
          surface_pts.push_back({i, j, k});
        }
  const int core_count = static_cast<int>(mesh.vertices.size());
  const int ns = static_cast<int>(surface_pts.size());
  const double log_span = std::log(r_out / r_in);
  for (int s = 1; s <= shells; ++s) {
    double beta = 0.0;
    if (box_outer) {
      const double x = std::log(radii[s] / r_in) / log_span;
      beta = x * x;
    }
    for (const auto& q : surface_pts) {
      const Vec3 logical = Vec3(q[0], q[1], q[2]) / n;
      const Vec3 dir = (1.0 - beta) * direction(logical) + beta * cube_point(logical);
      mesh.vertices.push_back(spec.center + radii[s] * dir);
    }
  }
  auto shell_id = [&](int s, int i, int j, int k) {
    if (s == 0) return core_id(i, j, k);
    return core_count + (s - 1) * ns + surface.at({i, j, k});
  };

  // Core cells.
  for (int k = -n; k < n; ++k)
    for (int j = -n; j < n; ++j)
      for (int i = -n; i < n; ++i) {
        const int lo[3] = {i, j, k};
        int hex[2][2][2];
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c) {
              const int off[3] = {a, b, c};
              int idx[3];
              for (int ax = 0; ax < 3; ++ax) {
                const bool flip = lo[ax] < 0;
                idx[ax] = lo[ax] + (flip ? 1 - off[ax] : off[ax]);
              }
              hex[a][b][c] = core_id(idx[0], idx[1], idx[2]);
            }
        emit_kuhn(mesh, hex);
      }
  const int core_tets = mesh.num_tets();

  // Shell cells: per cube face (axis, sign), per surface quad, per shell.
  for (int s = 1; s <= shells; ++s) {
    for (int axis = 0; axis < 3; ++axis) {
      const int ta = (axis + 1) % 3;
      const int tb = (axis + 2) % 3;
      for (int sign : {-1, 1}) {
        for (int u = -n; u < n; ++u) {
          for (int v = -n; v < n; ++v) {
            const bool flip_u = u < 0;
            const bool flip_v = v < 0;
            int hex[2][2][2];
            for (int a = 0; a < 2; ++a)
              for (int b = 0; b < 2; ++b)
                for (int c = 0; c < 2; ++c) {
                  std::array<int, 3> q{};
                  q[axis] = sign * n;
                  q[ta] = u + (flip_u ? 1 - b : b);
                  q[tb] = v + (flip_v ? 1 - c : c);
                  hex[a][b][c] = shell_id(s - 1 + a, q[0], q[1], q[2]);
                }
            emit_kuhn(mesh, hex);
          }
        }
      }
    }
  }

  mesh.region.assign(mesh.tets.size(), Region::Air);
  for (int t = 0; t < core_tets; ++t) mesh.region[t] = Region::Inclusion;
  if (box_outer && spec.magnet_slab > 0.0) {
    const double y_cut = spec.center[1] - r_out + spec.magnet_slab;
    for (int t = core_tets; t < mesh.num_tets(); ++t) {
      if (mesh.centroid(t)[1] < y_cut) mesh.region[t] = Region::Magnet;
    }
  }
  return finalize(std::move(mesh));
}

}  // namespace

int core_resolution(const GeometrySpec& spec) {
  return std::max(1, static_cast<int>(std::ceil(spec.inclusion_radius / spec.h - 1e-9)));
}

void validate(const GeometrySpec& spec) {
  if (!(spec.h > 0.0)) spec_error("mesh size h must be positive");
  switch (spec.kind) {
    case GeometryKind::Box:
      for (int a = 0; a < 3; ++a) {
        if (!(spec.extents[a] > 0.0)) spec_error("box extents must be positive");
        if (spec.cells[a] < 0) spec_error("cell counts must be nonnegative");
      }
      break;
    case GeometryKind::ToyMotor: {
      const auto& l = spec.layout;
      for (int a = 0; a < 3; ++a)
        if (!(spec.extents[a] > 0.0)) spec_error("toy motor extents must be positive");
      if (!(l.magnet > 0.0)) spec_error("toy motor magnet slab must have positive thickness");
      if (!(l.air_gap > 0.0)) spec_error("toy motor air gap must have positive thickness");
      if (!(l.design > 0.0)) spec_error("toy motor design slab must have positive thickness");
      if (l.bottom_air < 0.0) spec_error("toy motor bottom air thickness is negative");
      if (l.bottom_air + l.magnet + l.air_gap + l.design > spec.extents[1] + 1e-12)
        spec_error("toy motor slabs are thicker than the box");
      break;
    }
    case GeometryKind::GradedBall:
      if (spec.inclusion_radius != 1.0) spec_error("graded ball inclusion must be the unit ball");
      if (!(spec.outer_radius > 1.0)) spec_error("graded ball outer radius must exceed 1");
      if (!(spec.grading > 1.0)) spec_error("grading factor must exceed 1");
      break;
    case GeometryKind::InclusionBox:
      if (!(spec.inclusion_radius > 0.0)) spec_error("inclusion radius must be positive");
      if (!(0.5 * spec.extents[0] > spec.inclusion_radius))
        spec_error("inclusion does not fit into the box");
      if (!(spec.grading > 1.0)) spec_error("grading factor must exceed 1");
      if (spec.magnet_slab < 0.0 ||
          spec.magnet_slab >= 0.5 * spec.extents[0] - spec.inclusion_radius)
        spec_error("magnet slab overlaps the inclusion");
      break;
  }
}

std::size_t estimated_tets(const GeometrySpec& spec) {
  validate(spec);
  switch (spec.kind) {
    case GeometryKind::Box: {
      std::size_t c = 6;
      for (int a = 0; a < 3; ++a)
        c *= spec.cells[a] > 0 ? spec.cells[a] : cells_for(spec.extents[a], spec.h);
      return c;
    }
    case GeometryKind::ToyMotor: {
      const auto& l = spec.layout;
      const double slabs[5] = {l.bottom_air, l.magnet, l.air_gap, l.design,
                               spec.extents[1] - (l.bottom_air + l.magnet + l.air_gap + l.design)};
      std::size_t ny = 0;
      for (double t : slabs)
        if (t > 0.0) ny += cells_for(t, spec.h);
      auto even = [](int c) { return static_cast<std::size_t>(c + (c % 2)); };
      return 6 * ny * even(cells_for(spec.extents[0], spec.h)) * even(cells_for(spec.extents[2], spec.h));
    }
    case GeometryKind::GradedBall:
    case GeometryKind::InclusionBox: {
      const std::size_t m = 2 * static_cast<std::size_t>(core_resolution(spec));
      const std::size_t shells = shell_radii(spec).size() - 1;
      return 6 * m * m * m + shells * 6 * m * m * 6;
    }
  }
  return 0;
}

Mesh generate(const GeometrySpec& spec) {
  validate(spec);
  switch (spec.kind) {
    case GeometryKind::Box: return generate_box(spec);
    case GeometryKind::ToyMotor: return generate_toy_motor(spec);
    case GeometryKind::GradedBall: return generate_shells(spec, false);
    case GeometryKind::InclusionBox: return generate_shells(spec, true);
  }
  spec_error("unknown geometry kind");
}

}  // namespace curltd
