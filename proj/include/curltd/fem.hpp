#pragma once

#include "curltd/material.hpp"
#include "curltd/mesh.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <array>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace curltd {

struct SolveSettings {
  double kappa = kNu0 * 1e-6;  // L2 regularisation weight
  double newton_tol = 1e-8;    // relative residual
  int max_newton = 25;
  int line_search_halvings = 10;
  double linear_tol = 1e-10;   // relative residual of each linear solve

  void validate() const;
};

/// Edges on DIRICHLET facets are constrained (tangential trace zero).
struct DofMap {
  int n_edges = 0;
  std::vector<bool> constrained;
  std::vector<int> free;

  static DofMap dirichlet(const Mesh& mesh);
  int num_constrained() const { return n_edges - static_cast<int>(free.size()); }
};

/// Region -> material side. Every region present in the mesh must be mapped.
using SideMap = std::array<std::optional<Side>, kRegionCount>;

/// AIR, MAGNET, AIRGAP -> Two; IRON -> One; INCLUSION unmapped.
SideMap default_side_map();

/// Per-tet side from the region tags; Error::Configuration on a missing entry.
std::vector<Side> assign_sides(const Mesh& mesh, const SideMap& map);

struct GradientSpace;

/// Per-element data cached once per mesh: volumes, signed basis curls and
/// the signed local mass matrices.
class Discretization {
 public:
  explicit Discretization(const Mesh& mesh);

  const Mesh& mesh() const { return *mesh_; }
  const DofMap& dofs() const { return dofs_; }
  int num_edges() const { return mesh_->num_edges(); }

  double volume(int t) const { return volume_[t]; }
  const std::array<Vec3, 6>& curls(int t) const { return curls_[t]; }
  const Eigen::Matrix<double, 6, 6>& mass(int t) const { return mass_[t]; }
  Eigen::Matrix<double, 6, 1> gather(const VecX& u, int t) const;

  /// Constant curl of the Whitney field `u` on tet t.
  Vec3 curl(const VecX& u, int t) const;
  std::vector<Vec3> curls_per_tet(const VecX& u) const;

  /// Global Whitney mass matrix (no boundary condensation).
  SparseMatrix mass_matrix() const;
  /// Discrete gradient (edges x vertices): (G phi)_e = phi(v1) - phi(v0).
  SparseMatrix gradient_matrix() const;

  /// Factorised kappa-weighted nodal Laplacian on the free edges, built on
  /// first use and shared between threads.
  std::shared_ptr<const GradientSpace> gradient_space(double kappa) const;

 private:
  const Mesh* mesh_;
  DofMap dofs_;
  std::vector<double> volume_;
  std::vector<std::array<Vec3, 6>> curls_;
  std::vector<Eigen::Matrix<double, 6, 6>> mass_;
  mutable std::shared_ptr<std::mutex> gspace_mutex_ = std::make_shared<std::mutex>();
  mutable std::shared_ptr<const GradientSpace> gspace_;
};

/// Edge-coefficient representation of an H(curl) function (V s / m).
struct DiscreteField {
  const Mesh* mesh = nullptr;
  VecX coefficients;
};

/// Nonlinear curl-curl problem
///   int A(x, curl u + B0) . curl phi  [- int A(x, B0) . curl phi]
///     + kappa int u . phi - int M . curl phi = 0.
struct Problem {
  const Discretization* disc = nullptr;
  MaterialPair pair;
  std::vector<Side> sides;   // material per tet
  std::vector<Vec3> source;  // magnetisation M per tet (A/m); empty = none
  Vec3 background = Vec3::Zero();
  bool subtract_background = false;
  SolveSettings settings;

  Vec3 field_intensity(int t, const Vec3& curl_u) const;
  Mat3 field_jacobian(int t, const Vec3& curl_u) const;
};

VecX assemble_residual(const Problem& problem, const VecX& u);

/// Symmetric Jacobian; constrained rows and columns replaced by identity.
SparseMatrix assemble_jacobian(const Problem& problem, const VecX& u);

/// SPD solve with a relative-residual check. Without a discretisation, or
/// for small systems, a sparse LDL^T factorisation. Otherwise conjugate
/// gradients preconditioned by incomplete Cholesky plus an exact correction
/// in the discrete gradient space, where the curl-curl part vanishes and
/// only the kappa term acts.
class SpdSolver {
 public:
  SpdSolver();
  SpdSolver(const Discretization& disc, double kappa);
  ~SpdSolver();
  SpdSolver(SpdSolver&&) noexcept;
  SpdSolver& operator=(SpdSolver&&) noexcept;

  /// Throws Error::Solver if the factorisation fails.
  void compute(const SparseMatrix& a);
  /// Throws Error::Solver if |Ax - b| > tol |b|.
  VecX solve(const VecX& b, double tol) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct NewtonStep {
  int iteration = 0;
  double residual = 0.0;  // relative to the reference norm
  double step = 0.0;      // accepted damping factor (0 for the initial entry)
};

struct NewtonResult {
  VecX u;
  std::vector<NewtonStep> log;
  int iterations = 0;
  double residual = 0.0;
};

/// Thrown when Newton exceeds max_newton or stalls; carries the log.
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, std::vector<NewtonStep> log)
      : Error(Error::Kind::NonConvergence, what), log_(std::move(log)) {}
  const std::vector<NewtonStep>& log() const { return log_; }

 private:
  std::vector<NewtonStep> log_;
};

/// Damped Newton with a halving line search on the residual norm. The
/// residual is measured relative to |r(0)|, the norm of the load.
NewtonResult newton_solve(const Problem& problem, const VecX& initial);
NewtonResult newton_solve(const Problem& problem);

/// Curl of `u` at `point`; Error::Location outside the mesh.
Vec3 curl_at(const Discretization& disc, const TetLocator& locator, const VecX& u,
             const Vec3& point);

/// Edge moments int_e f . t ds (3-point Gauss), i.e. the Whitney interpolant.
VecX interpolate(const Mesh& mesh, const std::function<Vec3(const Vec3&)>& f);

/// Edge coefficients of grad(phi_h) for nodal P1 values.
VecX gradient_field(const Mesh& mesh, const VecX& nodal);

struct HelmholtzSplit {
  VecX phi;  // P1 nodal values, zero on DIRICHLET vertices
  VecX psi;  // u - grad(phi), Whitney coefficients
};

/// u = grad(phi) + psi with phi the L2 projection of u onto grad(H^1_0 P1).
HelmholtzSplit helmholtz_split(const Discretization& disc, const VecX& u,
                               double linear_tol = 1e-10);

/// L2 inner products via the exact Whitney mass matrix.
double l2_inner(const Discretization& disc, const VecX& a, const VecX& b);
/// L2 norm of the piecewise-constant curl.
double curl_l2_norm(const Discretization& disc, const VecX& u);

}  // namespace curltd
