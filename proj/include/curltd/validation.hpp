#pragma once

#include "curltd/cell_problem.hpp"

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

namespace curltd {

/// Result table of a study. `pass` is decided by the study from its rows and
/// the thresholds below.
struct StudyReport {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::map<std::string, double> fitted;
  std::vector<std::string> notes;
  bool pass = false;

  nlohmann::json to_json() const;
  std::string to_csv() const;
  /// Writes <dir>/<name>.csv and <dir>/<name>.json.
  void write(const std::string& dir) const;
};

inline constexpr double kRateThreshold = 1.35;
inline constexpr double kEquivarianceTolerance = 0.02;
inline constexpr double kOracleTolerance = 0.05;

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct RateStudyConfig {
  double box = 1.0;          // cube side L, centered at the origin
  int core_cells = 6;        // lattice cells per inclusion radius
  double grading = 1.3;
  double magnet_slab = 0.15; // at the y-min face, two poles along x
  double magnetization = 9e5;
  MaterialPair pair = saturation_pair();  // a1 inclusion in a2 background
  SolveSettings solve;
};

/// |curl(u_eps - u_0)|_{L2} with an a1 ball of radius eps L at the center
/// of an a2 box, against the same problem without the ball on the same mesh.
/// Error::Resolution when a ball holds fewer than 20 tets.
StudyReport rate_study_inclusion(const RateStudyConfig& config, const std::vector<double>& eps);

/// The 24 proper rotations mapping the coordinate axes onto themselves.
std::vector<Mat3> octahedral_rotations();

/// Map t -> t' with R x_t = x_t' for every tet, or empty when the mesh is
/// not invariant under R.
std::vector<int> tet_permutation(const Mesh& mesh, const Mat3& R);

/// Relative L2 discrepancy between curl K_{R^T U0} and R^T curl K_{U0}(R .),
/// tet by tet under the mesh symmetry (or by point location at centroids if
/// the mesh is not invariant under R).
double equivariance_discrepancy(const CellSolution& base, const CellSolution& rotated, const Mat3& R);

StudyReport rotation_equivariance_study(const MaterialPair& pair, Direction direction,
                                        const std::vector<Vec3>& U0s, const std::vector<Mat3>& rotations,
                                        std::shared_ptr<const CellDomain> domain,
                                        const SolveSettings& solve = {});

/// Computed T and interior curl against the sphere closed forms, one row
/// per epsilon; passes when every error is within 5% and the T error
/// decreases along the list.
StudyReport linear_oracle_study(double nu1, double nu2, const Vec3& U0, const std::vector<double>& eps,
                                const CellSettings& base);

/// Relative change of T under kappa scaled by each factor (report only).
StudyReport kappa_sensitivity_study(const MaterialPair& pair, Direction direction, const Vec3& U0,
                                    const std::vector<double>& factors, std::shared_ptr<const CellDomain> domain,
                                    const SolveSettings& solve = {});

}  // namespace curltd
