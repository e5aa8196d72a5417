#include "curltd/optimizer.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>

using namespace curltd;

namespace {

Mesh box(int n, Region tag) {
  GeometrySpec g;
  g.cells = {n, n, n};
  Mesh m = generate(g);
  m.region.assign(m.num_tets(), tag);
  return m;
}

GeometrySpec small_motor() {
  GeometrySpec g;
  g.kind = GeometryKind::ToyMotor;
  g.extents = Vec3(0.08, 0.05, 0.02);
  g.h = 0.01;
  return g;
}

// Tables of a linear contrast, T(t e1) = factor t e1.
TDTable linear_table(Direction d, double nu_in, double nu_out) {
  const double factor = 3 * nu_out * (nu_in - nu_out) / (2 * nu_in + nu_out);
  std::vector<Vec3> rows;
  for (int j = 0; j <= 40; ++j) rows.emplace_back(factor * 0.05 * j, 0, 0);
  return TDTable(d, 0.05, rows, {});
}

}  // namespace

TEST_SUITE("optimizer") {

TEST_CASE("objective values") {
  Mesh m = box(3, Region::AirGap);
  const Discretization d(m);
  // Unit gap volume, u = 0, target 1.
  const auto spec = normal_objective(m, Region::AirGap, [](const Vec3&) { return 1.0; },
                                     [](const Vec3&) { return Vec3::UnitY(); });
  CHECK(eval_J(d, spec, VecX::Zero(m.num_edges())) == doctest::Approx(1.0).epsilon(1e-13));

  // Target equal to the computed curl.
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  VecX u(m.num_edges());
  for (auto& x : u) x = n(rng);
  ObjectiveSpec exact = vector_objective(m, Region::AirGap, [](const Vec3&) { return Vec3::Zero(); });
  for (std::size_t i = 0; i < exact.tets.size(); ++i) exact.target[i] = d.curl(u, exact.tets[i]);
  CHECK(eval_J(d, exact, u) == 0.0);

  // curl (z, 0, 0) = e2, so both modes see the same mismatch.
  const VecX w = interpolate(m, [](const Vec3& x) { return Vec3(0.7 * x[2], 0, 0); });
  const auto vec = vector_objective(m, Region::AirGap, [](const Vec3& x) { return Vec3(0, 0.2 + x[0], 0); });
  const auto nor = normal_objective(m, Region::AirGap, [](const Vec3& x) { return 0.2 + x[0]; },
                                    [](const Vec3&) { return Vec3::UnitY(); });
  CHECK(eval_J(d, vec, w) == doctest::Approx(eval_J(d, nor, w)).epsilon(1e-12));
  // With an e1 component in the curl the modes differ.
  const VecX w2 = interpolate(m, [](const Vec3& x) { return Vec3(0.7 * x[2], 0, 0.4 * x[1]); });
  CHECK(eval_J(d, vec, w2) > eval_J(d, nor, w2) + 1e-3);

  Mesh air = box(2, Region::Air);
  CHECK_THROWS_AS(normal_objective(air, Region::AirGap, [](const Vec3&) { return 1.0; },
                                   [](const Vec3&) { return Vec3::UnitY(); }),
                  Error);
}

TEST_CASE("objective gradient matches finite differences") {
  Mesh m = box(3, Region::AirGap);
  const Discretization d(m);
  const auto spec = normal_objective(m, Region::AirGap, [](const Vec3& x) { return std::sin(3 * x[0]); },
                                     [](const Vec3&) { return Vec3(1, 2, 0).normalized(); });
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n;
  VecX u(m.num_edges()), v(m.num_edges());
  for (auto& x : u) x = n(rng);
  for (int e = 0; e < v.size(); ++e) v[e] = d.dofs().constrained[e] ? 0.0 : n(rng);
  const double exact = objective_gradient(d, spec, u).dot(v);
  // J is quadratic, so the central difference is exact up to rounding.
  const double tau = 1e-3;
  const double fd = (eval_J(d, spec, u + tau * v) - eval_J(d, spec, u - tau * v)) / (2 * tau);
  CHECK(fd == doctest::Approx(exact).epsilon(1e-8));
}

TEST_CASE("adjoint") {
  const GeometrySpec g = small_motor();
  TargetSpec target;
  MotorModel model(g, saturation_pair(), MagnetSpec{}, target, SolveSettings{});
  const auto state = DesignState::initial(model.mesh);
  const Problem p = model.problem(state);
  const auto st = newton_solve(p);
  const VecX adj = solve_adjoint(p, st.u, model.objective);
  const SparseMatrix J = assemble_jacobian(p, st.u);
  const VecX rhs = -objective_gradient(*model.disc, model.objective, st.u);
  CHECK((J * adj - rhs).norm() <= 1e-9 * rhs.norm());

  // dJ along a state perturbation v equals -<J'(u) v, p>; J is quadratic in
  // u so the forward difference error is O(tau).
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n;
  VecX v(st.u.size());
  for (int e = 0; e < v.size(); ++e) v[e] = model.disc->dofs().constrained[e] ? 0.0 : n(rng);
  v *= st.u.norm() / v.norm();
  const double pred = -(J * v).dot(adj);
  const double J0 = eval_J(*model.disc, model.objective, st.u);
  double prev = INFINITY;
  for (double tau : {1e-3, 1e-4, 1e-5}) {
    const double fd = (eval_J(*model.disc, model.objective, st.u + tau * v) - J0) / tau;
    const double err = std::abs(fd - pred);
    CHECK(err < 0.2 * prev);
    prev = err;
  }
  CHECK(prev <= 1e-3 * std::abs(pred));

  // Perfect tracking: the adjoint vanishes.
  ObjectiveSpec perfect = model.objective;
  for (std::size_t i = 0; i < perfect.tets.size(); ++i)
    perfect.target_normal[i] = model.disc->curl(st.u, perfect.tets[i]).dot(perfect.normal[i]);
  CHECK(solve_adjoint(p, st.u, perfect).norm() == 0.0);
}

TEST_CASE("td field") {
  Mesh m = box(3, Region::Iron);
  for (int t = 0; t < m.num_tets(); ++t)
    if (m.centroid(t)[0] > 0.67) m.region[t] = Region::AirGap;
  const Discretization d(m);
  auto state = DesignState::initial(m);
  state.psi.setConstant(-1.0);  // all design tets AIR
  const double nu1 = 200.0, nu2 = kNu0;
  const auto a = linear_table(Direction::InsertA1IntoA2, nu1, nu2);
  const auto b = linear_table(Direction::InsertA2IntoA1, nu2, nu1);
  const Vec3 U0(0, 0.9, 0), P0(0, -0.4, 0);
  const VecX u = interpolate(m, [&](const Vec3& x) { return Vec3(U0[1] * x[2], 0, 0); });
  const VecX p = interpolate(m, [&](const Vec3& x) { return Vec3(P0[1] * x[2], 0, 0); });

  const auto f = td_field(d, a, b, u, p, state);
  const double closed = 3 * nu2 * (nu1 - nu2) / (2 * nu1 + nu2) * U0.dot(P0);
  for (int t = 0; t < m.num_tets(); ++t) {
    if (m.region[t] == Region::AirGap) {
      CHECK(f.values[t] == 0.0);
    } else {
      CHECK(f.values[t] == doctest::Approx(closed).epsilon(1e-9));
    }
  }
  CHECK(td_field(d, a, b, u, VecX::Zero(m.num_edges()), state).values.norm() == 0.0);
  CHECK_THROWS_AS(td_field(d, b, a, u, p, state), Error);

  // Out of range: aborts unless clamped.
  const VecX big = 3.0 * u;
  CHECK_THROWS_AS(td_field(d, a, b, big, p, state), Error);
  const auto c = td_field(d, a, b, big, p, state, true);
  CHECK(c.clamped == state.num_design_tets());
}

TEST_CASE("level-set update") {
  Mesh m = box(3, Region::Iron);
  for (int t = 0; t < m.num_tets(); ++t)
    if (m.centroid(t)[1] < 0.34) m.region[t] = Region::Magnet;
  const Discretization d(m);
  const auto s0 = DesignState::initial(m);
  VecX td = VecX::Zero(m.num_tets());
  double vol = 0.0;
  for (int t = 0; t < m.num_tets(); ++t)
    if (s0.design[t]) {
      td[t] = -2.0;
      vol += d.volume(t);
    }
  const auto up = levelset_update(s0, d, td, 0.14);
  // g = -2 at every design node, |g|_{L2(D)} = 2 sqrt(|D|).
  CHECK(up.norm == doctest::Approx(2.0 * std::sqrt(vol)).epsilon(1e-12));
  std::vector<char> design_node(m.num_vertices(), 0);
  for (int t = 0; t < m.num_tets(); ++t)
    if (s0.design[t])
      for (int v : m.tets[t]) design_node[v] = 1;
  for (int v = 0; v < m.num_vertices(); ++v) {
    const double expect = design_node[v] ? 0.86 - 0.14 / std::sqrt(vol) : 1.0;
    CHECK(up.state.psi[v] == doctest::Approx(expect).epsilon(1e-12));
  }
  for (int t = 0; t < m.num_tets(); ++t)
    if (!s0.design[t]) CHECK(up.state.region(t) == Region::Magnet);

  const auto none = levelset_update(s0, d, VecX::Zero(m.num_tets()), 0.14);
  CHECK_FALSE(none.changed);
  CHECK_FALSE(none.notice.empty());
  CHECK(none.state.psi == s0.psi);
  CHECK_THROWS_AS(levelset_update(s0, d, td, 0.0), Error);
  CHECK_THROWS_AS(levelset_update(s0, d, td, 1.0), Error);
}

TEST_CASE("optimize pipeline") {
  const GeometrySpec g = small_motor();
  MotorModel model(g, saturation_pair(), MagnetSpec{}, TargetSpec{}, SolveSettings{});
  // Linearised tables around the unsaturated reluctivity.
  const auto a = linear_table(Direction::InsertA1IntoA2, 200.0, kNu0);
  const auto b = linear_table(Direction::InsertA2IntoA1, kNu0, 200.0);

  OptimizeSettings none;
  none.iterations = 0;
  const auto r0 = optimize(model, a, b, none);
  CHECK(r0.history.size() == 1);

  const auto dir = (std::filesystem::temp_directory_path() / "curltd_opt_test").string();
  std::filesystem::remove_all(dir);
  OptimizeSettings os;
  os.iterations = 2;
  os.clamp = true;
  os.output_dir = dir;
  const auto r1 = optimize(model, a, b, os);
  REQUIRE(r1.history.size() == 3);
  CHECK(r1.history[0].J == r0.history[0].J);
  for (const char* f : {"j_history.csv", "design_state.json", "snapshot_0.vtk", "snapshot_1.vtk", "snapshot_2.vtk"})
    CHECK(std::filesystem::exists(std::filesystem::path(dir) / f));
  std::ifstream csv(std::filesystem::path(dir) / "j_history.csv");
  int lines = 0;
  for (std::string l; std::getline(csv, l);) ++lines;
  CHECK(lines == 4);

  // Fixed regions are never reassigned.
  const auto regions = r1.final_state.regions();
  for (int t = 0; t < model.mesh.num_tets(); ++t)
    if (!r1.final_state.design[t]) CHECK(regions[t] == model.mesh.region[t]);

  const auto again = optimize(model, a, b, os);
  CHECK(again.J() == r1.J());
  std::filesystem::remove_all(dir);

  OptimizeSettings bad;
  bad.s = 1.5;
  CHECK_THROWS_AS(optimize(model, a, b, bad), Error);
}

TEST_CASE("sign of the objective change follows the topological derivative") {
  // Linear materials, so the closed-form tables are the exact sensitivities.
  GeometrySpec g = small_motor();
  g.h = 0.005;
  const auto pair = linear_pair(200.0, kNu0);
  MotorModel model(g, pair, MagnetSpec{}, TargetSpec{}, SolveSettings{});
  const auto a = linear_table(Direction::InsertA1IntoA2, 200.0, kNu0);
  const auto b = linear_table(Direction::InsertA2IntoA1, kNu0, 200.0);
  const auto s0 = DesignState::initial(model.mesh);
  const Problem p0 = model.problem(s0);
  const auto st = newton_solve(p0);
  const double J0 = eval_J(*model.disc, model.objective, st.u);
  const VecX adj = solve_adjoint(p0, st.u, model.objective);
  const auto f = td_field(*model.disc, a, b, st.u, adj, s0, true);

  // Remove iron from the single most negative and the single most positive tet.
  for (const bool negative : {true, false}) {
    int pick = -1;
    for (int t = 0; t < model.mesh.num_tets(); ++t) {
      if (!s0.design[t]) continue;
      if (pick < 0 || (negative ? f.values[t] < f.values[pick] : f.values[t] > f.values[pick])) pick = t;
    }
    Problem p1 = p0;
    p1.sides[pick] = Side::Two;
    const double J1 = eval_J(*model.disc, model.objective, newton_solve(p1).u);
    MESSAGE("td " << f.values[pick] << " |T| " << model.disc->volume(pick) << " dJ " << J1 - J0);
    CHECK((J1 - J0) * f.values[pick] > 0.0);
  }
}

TEST_CASE("td field is mirror symmetric on a symmetric motor") {
  // Two poles and one target period: x -> Lx - x flips magnet and target,
  // so U0 and P0 both change sign and td is even.
  GeometrySpec g = small_motor();
  g.h = 0.005;
  MotorModel model(g, saturation_pair(), MagnetSpec{}, TargetSpec{}, SolveSettings{});
  const auto a = linear_table(Direction::InsertA1IntoA2, 200.0, kNu0);
  const auto b = linear_table(Direction::InsertA2IntoA1, kNu0, 200.0);
  const auto state = DesignState::initial(model.mesh);
  const Problem p = model.problem(state);
  const auto st = newton_solve(p);
  const VecX adj = solve_adjoint(p, st.u, model.objective);
  const auto f = td_field(*model.disc, a, b, st.u, adj, state, true);

  // Compare per-hexahedron integrals; the Kuhn split itself is not mirror
  // symmetric.
  std::map<std::array<int, 3>, double> cell;
  const double hx = g.extents[0] / std::round(g.extents[0] / g.h);
  for (int t = 0; t < model.mesh.num_tets(); ++t) {
    if (!state.design[t]) continue;
    const Vec3 c = model.mesh.centroid(t);
    const std::array<int, 3> key{static_cast<int>(c[0] / hx), static_cast<int>(std::round(c[1] * 1e6)),
                                 static_cast<int>(c[2] / hx)};
    cell[key] += model.disc->volume(t) * f.values[t];
  }
  const int nx = static_cast<int>(std::round(g.extents[0] / hx));
  double diff = 0.0, norm = 0.0;
  for (const auto& [k, v] : cell) {
    const auto it = cell.find({nx - 1 - k[0], k[1], k[2]});
    REQUIRE(it != cell.end());
    diff += std::pow(v - it->second, 2);
    norm += v * v;
  }
  MESSAGE("mirror asymmetry " << std::sqrt(diff / norm));
  CHECK(std::sqrt(diff / norm) <= 0.01);
}

}  // TEST_SUITE
