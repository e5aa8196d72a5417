#pragma once

#include "curltd/cell_problem.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace curltd {

/// Quadratic interpolating B-spline with not-a-knot style knots: the
/// interior knots sit at midpoints of consecutive interior data sites.
class QuadraticSpline {
 public:
  QuadraticSpline() = default;
  /// xs strictly increasing, at least 3 sites.
  QuadraticSpline(const VecX& xs, const VecX& ys);
  static QuadraticSpline from_coefficients(VecX knots, VecX coeffs);

  double operator()(double x) const;

  const VecX& knots() const { return knots_; }
  const VecX& coeffs() const { return coeffs_; }

 private:
  VecX knots_;
  VecX coeffs_;
};

/// Orthogonal R with det 1 and R e1 = w (Rodrigues about e1 x w).
/// w = e1 gives I, w = -e1 gives diag(-1, 1, -1). Error::Domain unless |w| = 1.
Mat3 rotation_to(const Vec3& w);

struct GridSpec {
  double delta_t = 0.05;
  double t_max = 2.0;

  int num_points() const;  // including t = 0
  void validate() const;
};

struct TableProvenance {
  double epsilon = 0.0;
  double cell_h = 0.0;
  double grading = 0.0;
  std::string mesh_fingerprint;
  std::string material_hash;
  std::string spline_ends = "not-a-knot";
  std::string created;  // timestamp, the only nondeterministic field
};

/// T(t e1) on the grid t_j = j delta_t for one insertion direction.
class TDTable {
 public:
  TDTable() = default;
  /// rows[j] = T(j delta_t e1); rows[0] must be zero.
  TDTable(Direction direction, double delta_t, std::vector<Vec3> rows, TableProvenance provenance);

  Direction direction() const { return direction_; }
  double delta_t() const { return delta_t_; }
  double t_max() const { return delta_t_ * (static_cast<int>(rows_.size()) - 1); }
  const std::vector<Vec3>& rows() const { return rows_; }
  const TableProvenance& provenance() const { return provenance_; }
  double t(int j) const { return j * delta_t_; }

  /// Spline values of the three components at t.
  Vec3 at(double t) const;
  const QuadraticSpline& spline(int component) const { return spline_[component]; }

  nlohmann::json to_json() const;
  static TDTable from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  /// Error::Io with "table not found" when the file is missing.
  static TDTable load(const std::string& path);

 private:
  Direction direction_ = Direction::InsertA1IntoA2;
  double delta_t_ = 0.05;
  std::vector<Vec3> rows_;
  std::array<QuadraticSpline, 3> spline_;
  TableProvenance provenance_;
};

/// Raised by precompute; lists every grid value whose cell solve failed.
class PartialTable : public Error {
 public:
  PartialTable(const std::string& what, std::vector<double> failed)
      : Error(Error::Kind::PartialTable, what), failed_(std::move(failed)) {}
  const std::vector<double>& failed_t() const { return failed_; }

 private:
  std::vector<double> failed_;
};

/// One cell solve per grid point, in parallel over `jobs` workers.
TDTable precompute(const MaterialPair& pair, Direction direction, const GridSpec& grid,
                   std::shared_ptr<const CellDomain> domain, const SolveSettings& settings = {},
                   int jobs = 1);

struct TDValue {
  double value = 0.0;
  bool clamped = false;
};

/// dJ(U0, P0) = sum_i c_i T_i(|U0|) with c = R_{U0}^T P0. Error::OutOfRange
/// for |U0| > t_max unless `clamp`, which evaluates at t_max and flags it.
TDValue eval_dJ(const TDTable& table, const Vec3& U0, const Vec3& P0, bool clamp);
double eval_dJ(const TDTable& table, const Vec3& U0, const Vec3& P0);

/// For each interior knot j, |s_j(t_j) - T_1(t_j)| / |T_1(t_j)| where s_j
/// is the first-component spline fitted without knot j.
std::vector<double> leave_one_out(const TDTable& table);

}  // namespace curltd
