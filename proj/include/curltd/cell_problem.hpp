#pragma once

#include "curltd/fem.hpp"
#include "curltd/geometry.hpp"

#include <json.hpp>

#include <memory>
#include <string>
#include <vector>

namespace curltd {

/// Which material fills the inclusion. InsertA1IntoA2 puts a1 (iron) into an
/// a2 (air) background; InsertA2IntoA1 is the swapped-roles case.
enum class Direction { InsertA1IntoA2, InsertA2IntoA1 };

const char* to_string(Direction d);
Direction direction_from_string(const std::string& name);

struct CellSettings {
  double epsilon = 1.0 / 50.0;  // outer radius 1/epsilon
  double h = 0.15;              // mesh size inside the unit ball
  double grading = 1.2;
  SolveSettings solve;

  GeometrySpec geometry() const;
};

/// GradedBall mesh plus its discretisation; shared by every cell solve.
class CellDomain {
 public:
  explicit CellDomain(Mesh mesh, double epsilon);
  CellDomain(const CellDomain&) = delete;
  CellDomain& operator=(const CellDomain&) = delete;

  static std::shared_ptr<const CellDomain> build(const CellSettings& settings);

  const Mesh& mesh() const { return mesh_; }
  const Discretization& disc() const { return *disc_; }
  double epsilon() const { return epsilon_; }
  /// Volume of the INCLUSION tets, used as |omega|.
  double inclusion_volume() const { return inclusion_volume_; }
  const std::string& fingerprint() const { return fingerprint_; }
  bool in_inclusion(int t) const { return mesh_.region[t] == Region::Inclusion; }

 private:
  Mesh mesh_;
  std::unique_ptr<Discretization> disc_;
  double epsilon_;
  double inclusion_volume_;
  std::string fingerprint_;
};

struct CellSolution {
  std::shared_ptr<const CellDomain> domain;
  Vec3 U0 = Vec3::Zero();
  Direction direction = Direction::InsertA1IntoA2;
  VecX K;  // edge coefficients
  int iterations = 0;
  double residual = 0.0;
  std::vector<NewtonStep> log;
};

struct TDVector {
  Vec3 T = Vec3::Zero();
  Vec3 first_term = Vec3::Zero();
  Vec3 R1 = Vec3::Zero();
  Vec3 R2 = Vec3::Zero();
};

/// Inclusion / background laws for a direction.
const MaterialLaw& inner_law(const MaterialPair& pair, Direction d);
const MaterialLaw& outer_law(const MaterialPair& pair, Direction d);

/// Cell problem for K on the truncated ball:
///   int (A(curl K + U0) - A(U0)) . curl phi + kappa int K . phi
///     = - int_omega (a_in(U0) - a_out(U0)) . curl phi.
CellSolution solve_cell(std::shared_ptr<const CellDomain> domain, const MaterialPair& pair,
                        Direction direction, const Vec3& U0,
                        const SolveSettings& settings = SolveSettings{});

TDVector evaluate_td_vector(const CellSolution& sol, const MaterialPair& pair);

struct EpsilonRow {
  double epsilon = 0.0;
  TDVector td;
  double cauchy = -1.0;  // |T(eps_i) - T(eps_{i-1})|, negative for the first row
  std::size_t tets = 0;
};

struct EpsilonStudy {
  std::vector<EpsilonRow> rows;
};

/// T(U0) for a decreasing list of epsilons (outer radius 1/eps). Throws
/// Error::Resource, naming the largest feasible epsilon, when a mesh would
/// exceed `max_tets`.
EpsilonStudy epsilon_study(const MaterialPair& pair, Direction direction, const Vec3& U0,
                           const std::vector<double>& eps, const CellSettings& base,
                           std::size_t max_tets = 3'000'000);

nlohmann::json to_json(const Vec3& v);
Vec3 vec3_from_json(const nlohmann::json& j);
nlohmann::json cell_record(const CellSolution& sol, const TDVector& td);

}  // namespace curltd
