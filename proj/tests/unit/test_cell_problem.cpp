#include "curltd/cell_problem.hpp"

#include <doctest.h>

#include <cmath>

using namespace curltd;

namespace {

// Closed forms for a sphere of reluctivity nu_in in a background nu_out
// under a uniform field U0 (derived by hand, see test notes in README).
double interior_factor(double nu_in, double nu_out) { return 2 * (nu_out - nu_in) / (nu_out + 2 * nu_in); }
double td_factor(double nu_in, double nu_out) { return 3 * nu_out * (nu_in - nu_out) / (2 * nu_in + nu_out); }

std::shared_ptr<const CellDomain> coarse_domain(double eps = 0.1) {
  CellSettings s;
  s.h = 0.4;
  s.grading = 1.4;
  s.epsilon = eps;
  return CellDomain::build(s);
}

}  // namespace

TEST_SUITE("cell_problem") {

TEST_CASE("zero background gives zero variation") {
  auto dom = coarse_domain();
  const auto pair = saturation_pair();
  const auto sol = solve_cell(dom, pair, Direction::InsertA1IntoA2, Vec3::Zero());
  CHECK(sol.K.cwiseAbs().maxCoeff() == 0.0);
  const auto td = evaluate_td_vector(sol, pair);
  CHECK(td.T.norm() == 0.0);
}

TEST_CASE("linear contrast on a coarse cell") {
  auto dom = coarse_domain();
  const double nu1 = 200.0, nu2 = kNu0;
  const auto pair = linear_pair(nu1, nu2);
  const Vec3 U0(0.8, 0.0, 0.0);
  const auto sol = solve_cell(dom, pair, Direction::InsertA1IntoA2, U0);
  CHECK(sol.iterations == 1);
  const auto td = evaluate_td_vector(sol, pair);

  CHECK(td.T == td.first_term + td.R1 + td.R2);
  CHECK(td.R1.norm() <= 1e-9 * td.T.norm());
  CHECK((td.first_term - (nu1 - nu2) * U0).norm() == 0.0);
  const double ref = td_factor(nu1, nu2) * U0[0];
  MESSAGE("coarse T " << td.T.transpose() << " closed form " << ref);
  CHECK(std::abs(td.T[0] - ref) <= 0.1 * std::abs(ref));
  CHECK(std::abs(td.T[1]) <= 1e-6 * std::abs(ref));
  CHECK(std::abs(td.T[2]) <= 1e-6 * std::abs(ref));
  // Iron into air lowers the local energy mismatch for P0 = U0.
  CHECK(td.T.dot(U0) < 0.0);

  // The interior mean curl reconstructs T exactly in the linear case.
  Vec3 mean = Vec3::Zero();
  for (int t = 0; t < dom->mesh().num_tets(); ++t)
    if (dom->in_inclusion(t)) mean += dom->disc().volume(t) * dom->disc().curl(sol.K, t);
  mean /= dom->inclusion_volume();
  CHECK((td.T - (nu1 - nu2) * (U0 + mean)).norm() <= 1e-9 * td.T.norm());
  CHECK(mean[0] == doctest::Approx(interior_factor(nu1, nu2) * U0[0]).epsilon(0.1));
}

TEST_CASE("direction swap exchanges the roles of the laws") {
  auto dom = coarse_domain();
  const double nu1 = 200.0, nu2 = kNu0;
  const auto pair = linear_pair(nu1, nu2);
  const Vec3 U0(0, 0, 1.0);
  const auto sol = solve_cell(dom, pair, Direction::InsertA2IntoA1, U0);
  const auto td = evaluate_td_vector(sol, pair);
  const double ref = td_factor(nu2, nu1);
  MESSAGE("swapped T " << td.T.transpose() << " closed form " << ref);
  CHECK(td.T[2] == doctest::Approx(ref).epsilon(0.05));
  CHECK(td.T.dot(U0) > 0.0);
}

TEST_CASE("equal laws give no variation") {
  auto dom = coarse_domain();
  const auto pair = linear_pair(kNu0, kNu0);
  const auto sol = solve_cell(dom, pair, Direction::InsertA1IntoA2, Vec3(1, 2, 3));
  CHECK(sol.K.cwiseAbs().maxCoeff() == 0.0);
  CHECK(evaluate_td_vector(sol, pair).T.norm() == 0.0);
}

TEST_CASE("saturating cell is isotropic") {
  auto dom = coarse_domain();
  const auto pair = saturation_pair();
  const double t = 1.3;
  const auto a = evaluate_td_vector(solve_cell(dom, pair, Direction::InsertA1IntoA2, Vec3(t, 0, 0)), pair);
  const Vec3 d = Vec3(1, 2, -2).normalized();
  const auto sol = solve_cell(dom, pair, Direction::InsertA1IntoA2, t * d);
  CHECK(sol.residual <= 1e-8);
  const auto b = evaluate_td_vector(sol, pair);
  CHECK(a.R1.norm() > 0.0);
  CHECK(std::abs(a.T.norm() - b.T.norm()) <= 0.02 * a.T.norm());
  CHECK((b.T - b.T.dot(d) * d).norm() <= 0.02 * b.T.norm());
}

TEST_CASE("cell mesh must contain the inclusion") {
  GeometrySpec g;
  g.cells = {1, 1, 1};
  CHECK_THROWS_AS(CellDomain(generate(g), 0.1), Error);
}

TEST_CASE("epsilon study") {
  CellSettings base;
  base.h = 0.4;
  base.grading = 1.4;
  const auto pair = linear_pair(200.0, kNu0);
  const Vec3 U0(1, 0, 0);

  const auto one = epsilon_study(pair, Direction::InsertA1IntoA2, U0, {0.1}, base);
  REQUIRE(one.rows.size() == 1);
  CHECK(one.rows[0].cauchy < 0.0);

  // Discretisation noise hides the truncation trend on the coarsest mesh.
  CellSettings finer = base;
  finer.h = 0.2;
  const auto study = epsilon_study(pair, Direction::InsertA1IntoA2, U0, {1.0 / 25, 1.0 / 50, 1.0 / 100}, finer);
  REQUIRE(study.rows.size() == 3);
  MESSAGE("Cauchy differences " << study.rows[1].cauchy << " " << study.rows[2].cauchy);
  CHECK(study.rows[1].cauchy >= study.rows[2].cauchy);

  CHECK_THROWS_AS(epsilon_study(pair, Direction::InsertA1IntoA2, U0, {0.1, 0.2}, base), Error);
  try {
    epsilon_study(pair, Direction::InsertA1IntoA2, U0, {0.1, 0.001}, base, 20000);
    FAIL("expected a resource error");
  } catch (const Error& e) {
    CHECK(e.kind() == Error::Kind::Resource);
    CHECK(std::string(e.what()).find("0.1") != std::string::npos);
  }
}

TEST_CASE("estimated tet counts are exact") {
  CellSettings s;
  s.h = 0.4;
  s.epsilon = 0.05;
  const auto g = s.geometry();
  CHECK(estimated_tets(g) == static_cast<std::size_t>(generate(g).num_tets()));
}

TEST_CASE("json record") {
  auto dom = coarse_domain();
  const auto pair = linear_pair(200.0, kNu0);
  const auto sol = solve_cell(dom, pair, Direction::InsertA1IntoA2, Vec3(0.5, 0, 0));
  const auto rec = cell_record(sol, evaluate_td_vector(sol, pair));
  CHECK(rec.at("direction") == "a1-into-a2");
  CHECK(rec.at("epsilon").get<double>() == 0.1);
  CHECK(rec.at("mesh_fingerprint") == dom->fingerprint());
  CHECK(vec3_from_json(rec.at("U0")) == Vec3(0.5, 0, 0));
  for (const char* k : {"T", "parts", "residual", "iterations"}) CHECK(rec.contains(k));
  CHECK(direction_from_string("a2-into-a1") == Direction::InsertA2IntoA1);
  CHECK_THROWS_AS(direction_from_string("sideways"), Error);
}

}  // TEST_SUITE
