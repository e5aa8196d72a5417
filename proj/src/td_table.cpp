#include "curltd/td_table.hpp"

#include "curltd/parallel.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace curltd {

namespace {

constexpr int kDegree = 2;

// Index of the knot interval [t_i, t_{i+1}) holding x, clamped to the
// valid range so the right end belongs to the last interval.
int find_span(const VecX& t, int n, double x) {
  if (x >= t[n]) return n - 1;
  if (x <= t[kDegree]) return kDegree;
  const auto it = std::upper_bound(t.data() + kDegree, t.data() + n + 1, x);
  return static_cast<int>(it - t.data()) - 1;
}

// Nonzero basis values B_{span-2..span} at x (Cox-de Boor).
std::array<double, 3> basis(const VecX& t, int span, double x) {
  std::array<double, 3> N{1.0, 0.0, 0.0};
  std::array<double, 3> left{}, right{};
  for (int j = 1; j <= kDegree; ++j) {
    left[j] = x - t[span + 1 - j];
    right[j] = t[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double tmp = N[r] / (right[r + 1] + left[j - r]);
      N[r] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    N[j] = saved;
  }
  return N;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

}  // namespace

QuadraticSpline::QuadraticSpline(const VecX& xs, const VecX& ys) {
  const int n = static_cast<int>(xs.size());
  if (n < 3 || ys.size() != n) throw Error(Error::Kind::Domain, "spline: need >= 3 matching sites");
  for (int i = 1; i < n; ++i)
    if (!(xs[i] > xs[i - 1])) throw Error(Error::Kind::Domain, "spline: sites must increase");
  knots_.resize(n + kDegree + 1);
  for (int i = 0; i <= kDegree; ++i) {
    knots_[i] = xs[0];
    knots_[n + i] = xs[n - 1];
  }
  for (int i = 0; i + 3 < n; ++i) knots_[kDegree + 1 + i] = 0.5 * (xs[i + 1] + xs[i + 2]);

  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
  for (int r = 0; r < n; ++r) {
    const int span = find_span(knots_, n, xs[r]);
    const auto N = basis(knots_, span, xs[r]);
    for (int k = 0; k <= kDegree; ++k) B(r, span - kDegree + k) = N[k];
  }
  coeffs_ = B.partialPivLu().solve(ys);
}

QuadraticSpline QuadraticSpline::from_coefficients(VecX knots, VecX coeffs) {
  if (knots.size() != coeffs.size() + kDegree + 1)
    throw Error(Error::Kind::Domain, "spline: knot and coefficient counts disagree");
  QuadraticSpline s;
  s.knots_ = std::move(knots);
  s.coeffs_ = std::move(coeffs);
  return s;
}

double QuadraticSpline::operator()(double x) const {
  const int n = static_cast<int>(coeffs_.size());
  const int span = find_span(knots_, n, x);
  const auto N = basis(knots_, span, x);
  double v = 0.0;
  for (int k = 0; k <= kDegree; ++k) v += N[k] * coeffs_[span - kDegree + k];
  return v;
}

Mat3 rotation_to(const Vec3& w) {
  if (!(std::abs(w.norm() - 1.0) <= 1e-9)) throw Error(Error::Kind::Domain, "rotation_to: w must be a unit vector");
  const Vec3 e1 = Vec3::UnitX();
  auto rodrigues = [](const Vec3& from, const Vec3& to) {
    const Vec3 k = from.cross(to);
    const double c = from.dot(to);
    Mat3 K;
    K << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
    // (1 - cos) / sin^2 = 1 / (1 + cos)
    return Mat3(Mat3::Identity() + K + K * K / (1.0 + c));
  };
  const double c = e1.dot(w);
  const Mat3 flip = Vec3(-1, 1, -1).asDiagonal();
  if (w == -e1) return flip;
  // Near -e1 the axis is ill-conditioned; rotate from -e1 after the flip.
  if (c < -0.5) return rodrigues(-e1, w) * flip;
  return rodrigues(e1, w);
}

int GridSpec::num_points() const { return static_cast<int>(std::lround(t_max / delta_t)) + 1; }

void GridSpec::validate() const {
  if (!(delta_t > 0.0) || !(t_max > 0.0)) throw Error(Error::Kind::Configuration, "grid: need delta_t > 0 and t_max > 0");
  const double n = t_max / delta_t;
  if (std::abs(n - std::round(n)) > 1e-9 * n) throw Error(Error::Kind::Configuration, "grid: t_max must be a multiple of delta_t");
  if (num_points() < 3) throw Error(Error::Kind::Configuration, "grid: need at least 3 points");
}

TDTable::TDTable(Direction direction, double delta_t, std::vector<Vec3> rows, TableProvenance provenance)
    : direction_(direction), delta_t_(delta_t), rows_(std::move(rows)), provenance_(std::move(provenance)) {
  const int n = static_cast<int>(rows_.size());
  if (n < 3 || !(delta_t > 0.0)) throw Error(Error::Kind::Configuration, "table: need delta_t > 0 and >= 3 rows");
  if (rows_[0] != Vec3::Zero()) throw Error(Error::Kind::Configuration, "table: row 0 must be zero");
  VecX xs(n);
  for (int j = 0; j < n; ++j) xs[j] = t(j);
  for (int c = 0; c < 3; ++c) {
    VecX ys(n);
    for (int j = 0; j < n; ++j) ys[j] = rows_[j][c];
    spline_[c] = QuadraticSpline(xs, ys);
  }
}

Vec3 TDTable::at(double t) const { return Vec3(spline_[0](t), spline_[1](t), spline_[2](t)); }

nlohmann::json TDTable::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : rows_) rows.push_back({r[0], r[1], r[2]});
  const VecX& k = spline_[0].knots();
  nlohmann::json coeffs = nlohmann::json::array();
  for (const auto& s : spline_) coeffs.push_back(std::vector<double>(s.coeffs().begin(), s.coeffs().end()));
  return {
      {"direction", to_string(direction_)},
      {"delta_t", delta_t_},
      {"t_max", t_max()},
      {"rows", rows},
      {"spline_coeffs", {{"degree", kDegree}, {"knots", std::vector<double>(k.begin(), k.end())}, {"coeffs", coeffs}}},
      {"provenance",
       {{"epsilon", provenance_.epsilon},
        {"cell_h", provenance_.cell_h},
        {"grading", provenance_.grading},
        {"mesh_fingerprint", provenance_.mesh_fingerprint},
        {"material_hash", provenance_.material_hash},
        {"spline_ends", provenance_.spline_ends},
        {"created", provenance_.created}}},
  };
}

TDTable TDTable::from_json(const nlohmann::json& j) {
  try {
    std::vector<Vec3> rows;
    for (const auto& r : j.at("rows")) rows.emplace_back(r.at(0).get<double>(), r.at(1).get<double>(), r.at(2).get<double>());
    const auto& p = j.at("provenance");
    TableProvenance prov;
    prov.epsilon = p.at("epsilon").get<double>();
    prov.cell_h = p.value("cell_h", 0.0);
    prov.grading = p.value("grading", 0.0);
    prov.mesh_fingerprint = p.at("mesh_fingerprint").get<std::string>();
    prov.material_hash = p.at("material_hash").get<std::string>();
    prov.spline_ends = p.value("spline_ends", "not-a-knot");
    prov.created = p.value("created", "");
    TDTable table(direction_from_string(j.at("direction").get<std::string>()), j.at("delta_t").get<double>(),
                  std::move(rows), std::move(prov));
    // Stored coefficients must agree with a refit of the rows.
    const auto& sc = j.at("spline_coeffs").at("coeffs");
    for (int c = 0; c < 3; ++c) {
      const auto stored = sc.at(c).get<std::vector<double>>();
      const VecX& mine = table.spline_[c].coeffs();
      if (static_cast<int>(stored.size()) != mine.size())
        throw Error(Error::Kind::Configuration, "table: spline coefficient count mismatch");
      for (int i = 0; i < mine.size(); ++i)
        if (std::abs(stored[i] - mine[i]) > 1e-9 * (1.0 + std::abs(mine[i])))
          throw Error(Error::Kind::Configuration, "table: spline coefficients inconsistent with rows");
    }
    return table;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Error::Kind::Configuration, std::string("table: malformed json: ") + e.what());
  }
}

void TDTable::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(Error::Kind::Io, "cannot write " + path);
  out << std::setprecision(17) << to_json().dump(1) << '\n';
}

TDTable TDTable::load(const std::string& path) {
  if (!std::filesystem::exists(path)) throw Error(Error::Kind::Io, "table not found: " + path);
  std::ifstream in(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Error::Kind::Configuration, path + ": " + e.what());
  }
  return from_json(j);
}

TDTable precompute(const MaterialPair& pair, Direction direction, const GridSpec& grid,
                   std::shared_ptr<const CellDomain> domain, const SolveSettings& settings, int jobs) {
  grid.validate();
  const int n = grid.num_points();
  std::vector<Vec3> rows(n, Vec3::Zero());
  std::vector<char> failed(n, 0);
  std::vector<std::string> reasons(n);
  parallel_for(n - 1, resolve_jobs(jobs), [&](int i) {
    const int j = i + 1;
    try {
      const auto sol = solve_cell(domain, pair, direction, Vec3(j * grid.delta_t, 0, 0), settings);
      rows[j] = evaluate_td_vector(sol, pair).T;
    } catch (const Error& e) {
      failed[j] = 1;
      reasons[j] = e.what();
    }
  });
  std::vector<double> bad;
  std::ostringstream msg;
  msg << "precompute: cell solve failed at t =";
  for (int j = 1; j < n; ++j)
    if (failed[j]) {
      bad.push_back(j * grid.delta_t);
      msg << ' ' << j * grid.delta_t << " (" << reasons[j] << ")";
    }
  if (!bad.empty()) throw PartialTable(msg.str(), bad);

  TableProvenance prov;
  prov.epsilon = domain->epsilon();
  prov.mesh_fingerprint = domain->fingerprint();
  prov.material_hash = pair.hash();
  prov.created = timestamp();
  return TDTable(direction, grid.delta_t, std::move(rows), std::move(prov));
}

TDValue eval_dJ(const TDTable& table, const Vec3& U0, const Vec3& P0, bool clamp) {
  TDValue out;
  double t = U0.norm();
  if (t < 1e-12) return out;
  if (t > table.t_max() * (1 + 1e-12)) {
    if (!clamp) {
      std::ostringstream os;
      os << "eval_dJ: |U0| = " << t << " exceeds table range " << table.t_max();
      throw Error(Error::Kind::OutOfRange, os.str());
    }
    out.clamped = true;
    t = table.t_max();
  }
  const Vec3 c = rotation_to(U0 / U0.norm()).transpose() * P0;
  out.value = c.dot(table.at(std::min(t, table.t_max())));
  return out;
}

double eval_dJ(const TDTable& table, const Vec3& U0, const Vec3& P0) { return eval_dJ(table, U0, P0, false).value; }

std::vector<double> leave_one_out(const TDTable& table) {
  const int n = static_cast<int>(table.rows().size());
  std::vector<double> err;
  for (int j = 1; j + 1 < n; ++j) {
    VecX xs(n - 1), ys(n - 1);
    for (int i = 0, k = 0; i < n; ++i) {
      if (i == j) continue;
      xs[k] = table.t(i);
      ys[k++] = table.rows()[i][0];
    }
    const double ref = table.rows()[j][0];
    err.push_back(std::abs(QuadraticSpline(xs, ys)(table.t(j)) - ref) / std::abs(ref));
  }
  return err;
}

}  // namespace curltd
