#pragma once

#include "curltd/fem.hpp"
#include "curltd/geometry.hpp"
#include "curltd/td_table.hpp"

#include <json.hpp>

#include <functional>
#include <string>
#include <vector>

namespace curltd {

enum class TargetMode { Vector, Normal };

const char* to_string(TargetMode m);
TargetMode target_mode_from_string(const std::string& name);

/// Tracking objective over the gap tets, sampled once per tet.
struct ObjectiveSpec {
  Region gap = Region::AirGap;
  TargetMode mode = TargetMode::Normal;
  std::vector<int> tets;
  std::vector<Vec3> target;            // Vector mode
  std::vector<double> target_normal;   // Normal mode
  std::vector<Vec3> normal;            // Normal mode, unit length

  void validate() const;
};

ObjectiveSpec vector_objective(const Mesh& mesh, Region gap,
                               const std::function<Vec3(const Vec3&)>& target);
ObjectiveSpec normal_objective(const Mesh& mesh, Region gap,
                               const std::function<double(const Vec3&)>& target,
                               const std::function<Vec3(const Vec3&)>& normal);

/// sum over gap tets of |T| * mismatch^2 at the tet's constant curl.
double eval_J(const Discretization& disc, const ObjectiveSpec& spec, const VecX& u);

/// dJ/du per edge coefficient; zero on constrained edges.
VecX objective_gradient(const Discretization& disc, const ObjectiveSpec& spec, const VecX& u);

/// Solves J'(u) p = -dJ/du with the state Jacobian at the converged u.
VecX solve_adjoint(const Problem& problem, const VecX& u, const ObjectiveSpec& spec);

/// Level-set design. Phase per tet from the mean of its nodal psi:
/// psi > 0 is IRON, otherwise AIR, inside the design tets only.
struct DesignState {
  VecX psi;
  std::vector<char> design;        // per tet
  std::vector<Region> base_region; // mesh tags, never modified
  double J = 0.0;
  int iteration = 0;

  /// Every tet tagged `design_tag` becomes design; psi = psi0 at all nodes.
  static DesignState initial(const Mesh& mesh, Region design_tag = Region::Iron, double psi0 = 1.0);

  Region region(int t) const;
  std::vector<Region> regions() const;
  std::vector<Side> sides(const SideMap& map = default_side_map()) const;
  /// Iron volume over design volume.
  double iron_fraction(const Mesh& mesh) const;
  int num_design_tets() const;

  nlohmann::json to_json() const;

 private:
  std::vector<std::array<int, 4>> tet_vertices_;
};

struct TDField {
  VecX values;       // per tet, zero outside the design region
  int clamped = 0;   // tets evaluated at t_max under the clamp flag
  double max_U0 = 0.0;
};

/// dJ(U0, P0) per design tet with U0 = curl u, P0 = curl p. AIR tets use
/// the iron-into-air table, IRON tets the air-into-iron table. Tets with
/// |U0| beyond a table range raise one aggregated Error::OutOfRange unless
/// `clamp` is set.
TDField td_field(const Discretization& disc, const TDTable& iron_into_air,
                 const TDTable& air_into_iron, const VecX& u, const VecX& p,
                 const DesignState& state, bool clamp = false);

struct LevelSetUpdate {
  DesignState state;
  bool changed = false;
  double norm = 0.0;   // L2 norm of the nodal sensitivity over the design
  std::string notice;
};

/// psi1 = (1 - s) psi0 + s g / |g|_{L2(D)} on design nodes, where g is the
/// volume-weighted nodal average of the generalized sensitivity (td on
/// IRON tets, -td on AIR tets). Error::Domain unless 0 < s < 1.
LevelSetUpdate levelset_update(const DesignState& state, const Discretization& disc,
                               const VecX& td, double s);

/// Magnet slabs split into `poles` equal pieces along x with alternating
/// signs of `magnitude * direction`.
struct MagnetSpec {
  double magnitude = 9e5;  // A/m
  int poles = 2;
  Vec3 direction = Vec3::UnitY();
};

std::vector<Vec3> magnetization(const Mesh& mesh, const MagnetSpec& spec, double length_x);

/// Sinusoidal target along x: amplitude * sin(2 pi periods x / Lx + phase)
/// as the normal component along `direction` (Normal) or times `direction`
/// (Vector).
struct TargetSpec {
  TargetMode mode = TargetMode::Normal;
  double amplitude = 0.3;  // T
  double periods = 1.0;
  double phase = 0.0;
  Vec3 direction = Vec3::UnitY();

  ObjectiveSpec build(const Mesh& mesh, double length_x) const;
};

struct OptimizeSettings {
  double s = 0.14;
  int iterations = 1;
  bool clamp = false;
  std::string output_dir;  // empty: no files
};

/// Everything the optimizer needs about the machine model.
struct MotorModel {
  Mesh mesh;
  std::unique_ptr<Discretization> disc;
  MaterialPair pair;
  std::vector<Vec3> source;
  ObjectiveSpec objective;
  SolveSettings solve;

  MotorModel(Mesh mesh, MaterialPair pair, const MagnetSpec& magnet, const TargetSpec& target,
             const SolveSettings& solve);
  MotorModel(const GeometrySpec& geometry, MaterialPair pair, const MagnetSpec& magnet,
             const TargetSpec& target, const SolveSettings& solve);

  Problem problem(const DesignState& state) const;
};

struct IterationRecord {
  int iteration = 0;
  double J = 0.0;
  double iron_fraction = 0.0;
  int newton_iterations = 0;
  double td_norm = 0.0;
  int clamped = 0;
};

struct RunReport {
  std::vector<IterationRecord> history;
  std::vector<std::string> notices;
  DesignState final_state;
  VecX u;  // final state

  std::vector<double> J() const;
  nlohmann::json to_json() const;
};

/// state -> adjoint -> td -> level-set update -> re-solve, `iterations`
/// times. Failures are rethrown with the stage name prepended. Writes
/// j_history.csv, snapshot_<k>.vtk and design_state.json when an output
/// directory is set.
RunReport optimize(const MotorModel& model, const TDTable& iron_into_air, const TDTable& air_into_iron,
                   const OptimizeSettings& settings);

}  // namespace curltd
