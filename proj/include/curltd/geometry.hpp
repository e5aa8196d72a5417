#pragma once

#include "curltd/mesh.hpp"

namespace curltd {

enum class GeometryKind { Box, ToyMotor, GradedBall, InclusionBox };

const char* to_string(GeometryKind k);
GeometryKind geometry_kind_from_string(const std::string& name);

/// Slab thicknesses (meters) of the toy motor, stacked along y from y = 0:
/// bottom air, magnet, air gap, design region; the rest up to W is air.
struct ToyMotorLayout {
  double bottom_air = 0.01;
  double magnet = 0.01;
  double air_gap = 0.004;
  double design = 0.02;
};

struct GeometrySpec {
  GeometryKind kind = GeometryKind::Box;

  // Box / ToyMotor: [0,Lx] x [0,Ly] x [0,Lz]. InclusionBox: cube side Lx
  // centered at `center`.
  Vec3 extents{1.0, 1.0, 1.0};
  // Box only: explicit cell counts; zero entries are derived from h.
  std::array<int, 3> cells{0, 0, 0};
  double h = 0.2;

  ToyMotorLayout layout;

  // GradedBall / InclusionBox
  double outer_radius = 50.0;
  double grading = 1.4;
  double inclusion_radius = 1.0;
  Vec3 center{0.0, 0.0, 0.0};
  // InclusionBox: thickness of the MAGNET slab at the bottom (y-min) face.
  double magnet_slab = 0.0;
};

/// Throws Error::Spec on inconsistent parameters.
void validate(const GeometrySpec& spec);

/// Deterministic mesh generation; boundary facets on all of the outer
/// boundary are DIRICHLET.
Mesh generate(const GeometrySpec& spec);

/// Exact tet count of `generate(spec)` without building the mesh.
std::size_t estimated_tets(const GeometrySpec& spec);

/// Number of lattice cells per core radius used for a shell mesh of the
/// given spec (GradedBall / InclusionBox).
int core_resolution(const GeometrySpec& spec);

}  // namespace curltd
