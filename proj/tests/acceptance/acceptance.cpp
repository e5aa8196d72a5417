// Acceptance checks, one line per criterion:
//   criterion <n> <name>: PASS|FAIL  <details>
// Pass criterion numbers as arguments to run a subset.

#include "curltd/config.hpp"
#include "curltd/fem.hpp"
#include "curltd/material.hpp"
#include "curltd/optimizer.hpp"
#include "curltd/td_table.hpp"
#include "curltd/validation.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

using namespace curltd;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string details;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

int jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Mat3 a;
  for (int i = 0; i < 9; ++i) a(i) = n(rng);
  Eigen::HouseholderQR<Mat3> qr(a);
  Mat3 q = qr.householderQ();
  if (q.determinant() < 0) q.col(0) *= -1;
  return q;
}

Mesh unit_box(int n) {
  GeometrySpec g;
  g.cells = {n, n, n};
  return generate(g);
}

VecX random_edges(const Discretization& d, double scale, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  VecX x(d.num_edges());
  for (int e = 0; e < x.size(); ++e) x[e] = d.dofs().constrained[e] ? 0.0 : u(rng);
  return x;
}

// Linear-contrast table shared by criteria 3 and 9.
const TDTable& linear_table() {
  static const TDTable table = [] {
    CellSettings cs;
    cs.h = 0.4;
    cs.grading = 1.4;
    cs.epsilon = 0.1;
    return precompute(linear_pair(200.0, kNu0), Direction::InsertA1IntoA2, GridSpec{0.1, 2.0},
                      CellDomain::build(cs), {}, jobs());
  }();
  return table;
}

Outcome linear_oracle() {
  const auto rep = linear_oracle_study(200.0, kNu0, Vec3(1, 0, 0), {1.0 / 10, 1.0 / 25, 1.0 / 50}, CellSettings{});
  const auto& last = rep.rows.back();
  return {rep.pass, "eps=1/50 tets=" + fmt(last[1]) + " T_err=" + fmt(last[6]) + " interior_dev=" + fmt(last[7]) +
                        " (mean-based " + fmt(last[8]) + "), T_err by eps " + fmt(rep.rows[0][6]) + " " +
                        fmt(rep.rows[1][6]) + " " + fmt(last[6])};
}

Outcome rate() {
  const auto rep = rate_study_inclusion(RateStudyConfig{}, {0.2, 0.1, 0.05});
  std::string d = "slope=" + fmt(rep.fitted.at("slope")) + " (threshold " + fmt(kRateThreshold) + "), curl error at eps 0.2 0.1 0.05:";
  for (const auto& r : rep.rows) d += " " + fmt(r[4]);
  return {rep.pass, d};
}

// Errors are relative to |P0| |T(|U0|)|, the size of the functional at
// U0. Pointwise ratios blow up where P0 is nearly orthogonal to T; the worst
// one is reported alongside.
Outcome rotation_reduction() {
  const TDTable& table = linear_table();
  std::mt19937_64 rng(99);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> u(-1, 1);
  double worst_rot = 0.0, worst_lin = 0.0, worst_pointwise = 0.0;
  for (int i = 0; i < 10000; ++i) {
    Vec3 U(n(rng), n(rng), n(rng));
    U *= table.t_max() * std::abs(u(rng)) / U.norm();
    const Vec3 P(n(rng), n(rng), n(rng)), Q(n(rng), n(rng), n(rng));
    const Mat3 R = random_rotation(rng);
    const double size = table.at(U.norm()).norm();
    if (size == 0.0) continue;
    const double ref = eval_dJ(table, U, P);
    const double rot = eval_dJ(table, R.transpose() * U, R.transpose() * P);
    worst_rot = std::max(worst_rot, std::abs(rot - ref) / (size * P.norm()));
    worst_pointwise = std::max(worst_pointwise, std::abs(rot - ref) / std::abs(ref));
    const double a = u(rng), b = u(rng);
    const Vec3 mix = a * P + b * Q;
    const double lhs = eval_dJ(table, U, mix);
    const double q = eval_dJ(table, U, Q);
    worst_lin = std::max(worst_lin, std::abs(lhs - (a * ref + b * q)) / (size * (std::abs(a) * P.norm() + std::abs(b) * Q.norm())));
  }
  return {worst_rot <= 1e-9 && worst_lin <= 1e-12,
          "10^4 rotations on a computed table: rotation " + fmt(worst_rot) + " linearity " + fmt(worst_lin) +
              " (worst pointwise ratio " + fmt(worst_pointwise) + ")"};
}

Outcome equivariance() {
  CellSettings cs;
  cs.h = 0.2;
  cs.grading = 1.4;
  Mat3 c3;
  c3 << 0, 0, 1, 1, 0, 0, 0, 1, 0;
  const auto rep = rotation_equivariance_study(saturation_pair(), Direction::InsertA1IntoA2,
                                               {Vec3(1.2, 0, 0), Vec3(0.9, 0.5, 0.3)},
                                               {Mat3::Identity(), octahedral_rotations()[1], c3}, CellDomain::build(cs));
  return {rep.pass, "max discrepancy " + fmt(rep.fitted.at("max_discrepancy")) + " over identity, Rz90, C3 (tolerance " +
                        fmt(kEquivarianceTolerance) + ")"};
}

Outcome jacobian() {
  const Mesh m = unit_box(3);
  const Discretization d(m);
  Problem p;
  p.disc = &d;
  p.pair = saturation_pair();
  p.sides.assign(m.num_tets(), Side::Two);
  for (int t = 0; t < m.num_tets(); ++t)
    if (m.centroid(t)[0] < 0.5) p.sides[t] = Side::One;
  p.source.assign(m.num_tets(), Vec3(0, 4e5, 0));
  const VecX u = random_edges(d, 0.3, 5);
  const SparseMatrix j = assemble_jacobian(p, u);
  const SparseMatrix jt = j.transpose();
  const double asym = (j - jt).norm() / j.norm();

  const VecX v = random_edges(d, 0.3, 6);
  const VecX jv = j * v;
  const VecX r0 = assemble_residual(p, u);
  std::vector<double> err;
  for (double h : {1e-2, 1e-3, 1e-4, 1e-5}) err.push_back((((assemble_residual(p, u + h * v) - r0) / h) - jv).norm());
  // Decades where the error still drops by at least 5x are before the floor.
  int first_order = 0;
  for (std::size_t k = 1; k < err.size(); ++k) {
    const double order = std::log10(err[k - 1] / err[k]);
    if (order >= 0.9 && order <= 1.1) ++first_order;
  }
  std::string d_str = "asymmetry " + fmt(asym) + ", FD errors";
  for (double e : err) d_str += " " + fmt(e);
  return {asym <= 1e-12 && first_order >= 2, d_str + ", first-order decades " + std::to_string(first_order)};
}

Outcome material() {
  const SaturationLaw law;
  const auto rep = check_assumptions(saturation_pair(law), 10000, 10.0, 42);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1, 1);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (int i = 0; i < 10000; ++i) {
    Vec3 y(u(rng), u(rng), u(rng));
    if (y.norm() > 1.0) continue;
    y *= 10.0;
    const auto ev = Eigen::SelfAdjointEigenSolver<Mat3>(saturation_da(law, y), Eigen::EigenvaluesOnly).eigenvalues();
    lo = std::min(lo, ev.minCoeff());
    hi = std::max(hi, ev.maxCoeff());
  }
  const bool c1_ok = rep.c1_est >= 200.0 * (1 - 1e-6);
  const bool band_ok = lo >= law.q1 * (1 - 1e-6) && hi <= law.nu0 * (1 + 1e-6);
  return {c1_ok && band_ok, "c1=" + fmt(rep.c1_est) + (c1_ok ? " ok" : " low") + ", eigenvalues of da1 in [" + fmt(lo) +
                                ", " + fmt(hi / law.nu0) + " nu0] vs band [q1, nu0]" + (band_ok ? " ok" : " exceeded")};
}

Outcome one_shot() {
  RunConfig cfg = RunConfig::load(std::string(CURLTD_SOURCE_DIR) + "/configs/toy_motor.json");
  const fs::path work = fs::path(CURLTD_BINARY_DIR) / "acceptance_toy";
  fs::create_directories(work / "tables");
  const auto dom = CellDomain::build(cfg.cell);
  const auto pair = saturation_pair(cfg.material);
  const TDTable a = precompute(pair, Direction::InsertA1IntoA2, cfg.grid, dom, cfg.solve, jobs());
  const TDTable b = precompute(pair, Direction::InsertA2IntoA1, cfg.grid, dom, cfg.solve, jobs());
  a.save((work / "tables/a1-into-a2.json").string());
  b.save((work / "tables/a2-into-a1.json").string());
  MotorModel model(cfg.geometry, pair, cfg.magnet, cfg.target, cfg.solve);
  OptimizeSettings os = cfg.optimize;
  os.iterations = 1;
  os.output_dir = (work / "run").string();
  const auto rep = optimize(model, a, b, os);
  const double j0 = rep.history[0].J, j1 = rep.history[1].J;
  return {j1 < j0, "J " + fmt(j0) + " -> " + fmt(j1) + ", iron fraction " + fmt(rep.history[1].iron_fraction) +
                       ", clamped " + std::to_string(rep.history[0].clamped)};
}

Outcome helmholtz() {
  const Mesh m = unit_box(4);
  const Discretization d(m);
  const VecX u = random_edges(d, 1.0, 8);
  const auto split = helmholtz_split(d, u);
  const VecX gphi = gradient_field(m, split.phi);
  const double recon = (gphi + split.psi - u).cwiseAbs().maxCoeff() / u.cwiseAbs().maxCoeff();
  const double ortho = std::abs(l2_inner(d, gphi, split.psi)) / l2_inner(d, u, u);
  VecX phi(m.num_vertices());
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> r(-1, 1);
  for (auto& x : phi) x = r(rng);
  const VecX g = gradient_field(m, phi);
  double cg = 0.0, scale = 0.0;
  for (int t = 0; t < m.num_tets(); ++t) {
    cg = std::max(cg, d.curl(g, t).norm());
    double s = 0.0;
    for (int k = 0; k < 6; ++k) s += d.curls(t)[k].norm() * std::abs(g[m.tet_edges[t][k].index]);
    scale = std::max(scale, s);
  }
  cg /= scale;
  return {recon <= 1e-15 && ortho <= 1e-10 && cg <= 1e-12,
          "reconstruction " + fmt(recon) + ", orthogonality " + fmt(ortho) + ", curl grad " + fmt(cg)};
}

Outcome table_fidelity() {
  const TDTable& table = linear_table();
  double knot = 0.0;
  for (int j = 0; j < static_cast<int>(table.rows().size()); ++j) {
    const Vec3 v = table.at(table.t(j));
    const Vec3& row = table.rows()[j];
    knot = std::max(knot, (v - row).norm() / std::max(row.norm(), 1e-300));
  }
  double loo = 0.0;
  for (double e : leave_one_out(table)) loo = std::max(loo, e);
  return {knot <= 1e-12 && loo <= 0.01, "knot error " + fmt(knot) + ", leave-one-out max " + fmt(loo) + " over " +
                                             std::to_string(table.rows().size()) + " rows"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"linear oracle", linear_oracle},
      {"asymptotic rate", rate},
      {"rotation reduction", rotation_reduction},
      {"cell equivariance", equivariance},
      {"jacobian", jacobian},
      {"material assumptions", material},
      {"one-shot decrease", one_shot},
      {"helmholtz split", helmholtz},
      {"table fidelity", table_fidelity},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(n)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "criterion " << n << ' ' << criteria[i].first << ": " << (o.pass ? "PASS" : "FAIL") << "  "
              << o.details << " [" << fmt(secs) << " s]" << std::endl;
    failed += !o.pass;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << '\n';
  return failed ? 1 : 0;
}
