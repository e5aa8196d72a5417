#include "curltd/td_table.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

using namespace curltd;

namespace {

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Mat3 a;
  for (int i = 0; i < 9; ++i) a(i) = n(rng);
  Mat3 q = Eigen::HouseholderQR<Mat3>(a).householderQ();
  if (q.determinant() < 0) q.col(0) *= -1;
  return q;
}

// Smooth synthetic table along e1 only, as isotropy requires.
TDTable synthetic_table(double delta_t = 0.05, int n = 41) {
  std::vector<Vec3> rows(n, Vec3::Zero());
  for (int j = 1; j < n; ++j) {
    const double t = j * delta_t;
    rows[j] = Vec3(-1e6 * t * std::exp(-0.3 * t * t), 0, 0);
  }
  return TDTable(Direction::InsertA1IntoA2, delta_t, rows, {});
}

}  // namespace

TEST_SUITE("td_table") {

TEST_CASE("quadratic spline against an independent reference") {
  // Reference values from scipy.interpolate.make_interp_spline(k=2).
  VecX xs(5), ys(5);
  xs << 0, 0.3, 0.7, 1.0, 1.5;
  ys << 0, 1, 0.5, 2, -1;
  const QuadraticSpline s(xs, ys);
  VecX knots(8);
  knots << 0, 0, 0, 0.5, 0.85, 1.5, 1.5, 1.5;
  CHECK((s.knots() - knots).norm() == 0.0);
  const double at[] = {0.1, 0.5, 0.85, 1.2, 1.4};
  const double ref[] = {0.5403941829314964, 0.6313624186758515, 1.2564365671641793, 1.81142365097589,
                        0.2742824339839276};
  for (int i = 0; i < 5; ++i) CHECK(s(at[i]) == doctest::Approx(ref[i]).epsilon(1e-13));
  for (int i = 0; i < 5; ++i) CHECK(std::abs(s(xs[i]) - ys[i]) <= 1e-14);
  // Piecewise quadratics reproduce a quadratic exactly.
  for (int i = 0; i < 5; ++i) ys[i] = 3 * xs[i] * xs[i] - xs[i] + 2;
  const QuadraticSpline q(xs, ys);
  for (double x = 0; x <= 1.5; x += 0.01) CHECK(q(x) == doctest::Approx(3 * x * x - x + 2).epsilon(1e-13));

  VecX bad(3);
  bad << 0, 1, 1;
  CHECK_THROWS_AS(QuadraticSpline(bad, bad), Error);
}

TEST_CASE("rotation_to") {
  CHECK(rotation_to(Vec3::UnitX()) == Mat3::Identity());
  CHECK(rotation_to(-Vec3::UnitX()) == Mat3(Vec3(-1, 1, -1).asDiagonal()));
  // Rodrigues by hand: axis e1 x e3 = -e2, angle pi/2.
  Mat3 ref;
  ref << 0, 0, -1, 0, 1, 0, 1, 0, 0;
  CHECK((rotation_to(Vec3::UnitZ()) - ref).norm() <= 1e-15);
  CHECK_THROWS_AS(rotation_to(Vec3(1, 1, 0)), Error);

  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  for (int i = 0; i < 1000; ++i) {
    Vec3 w(n(rng), n(rng), n(rng));
    if (i % 10 == 0) w = Vec3(-1, 1e-9 * n(rng), 1e-9 * n(rng));
    w.normalize();
    const Mat3 R = rotation_to(w);
    CHECK((R * Vec3::UnitX() - w).norm() <= 1e-12);
    CHECK((R.transpose() * R - Mat3::Identity()).norm() <= 1e-12);
    CHECK(R.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("table interpolates its rows") {
  const auto table = synthetic_table();
  CHECK(table.rows().size() == 41);
  CHECK(table.t_max() == doctest::Approx(2.0));
  for (int j = 0; j < 41; ++j) {
    const Vec3 v = table.at(table.t(j));
    CHECK((v - table.rows()[j]).norm() <= 1e-12 * std::max(1.0, table.rows()[j].norm()));
  }
  std::vector<Vec3> rows(5, Vec3::Ones());
  CHECK_THROWS_AS(TDTable(Direction::InsertA1IntoA2, 0.1, rows, {}), Error);
}

TEST_CASE("eval_dJ reduction properties") {
  const auto table = synthetic_table();
  const double t = 0.73;
  const Vec3 P(0.3, -1.2, 0.5);
  CHECK(eval_dJ(table, Vec3(t, 0, 0), P) == doctest::Approx(P.dot(table.at(t))).epsilon(1e-15));
  CHECK(eval_dJ(table, Vec3(1, 1, 0), Vec3::Zero()) == 0.0);
  CHECK(eval_dJ(table, Vec3::Zero(), P) == 0.0);

  std::mt19937_64 rng(2024);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> u(-1, 1);
  double worst_rot = 0.0, worst_lin = 0.0;
  for (int i = 0; i < 10000; ++i) {
    Vec3 U(n(rng), n(rng), n(rng));
    U *= 1.9 * std::abs(u(rng)) / U.norm();
    const Vec3 P0(n(rng), n(rng), n(rng)), Q0(n(rng), n(rng), n(rng));
    const Mat3 R = random_rotation(rng);
    const double ref = eval_dJ(table, U, P0);
    worst_rot = std::max(worst_rot, std::abs(eval_dJ(table, R.transpose() * U, R.transpose() * P0) - ref) /
                                        (1 + std::abs(ref)));
    const double a = u(rng), b = u(rng);
    const double lhs = eval_dJ(table, U, a * P0 + b * Q0);
    const double rhs = a * ref + b * eval_dJ(table, U, Q0);
    worst_lin = std::max(worst_lin, std::abs(lhs - rhs) / std::max(std::abs(a * ref) + std::abs(rhs), 1e-300));
  }
  MESSAGE("rotation " << worst_rot << " linearity " << worst_lin);
  CHECK(worst_rot <= 1e-9);
  CHECK(worst_lin <= 1e-12);
}

TEST_CASE("transverse table components break the reduction") {
  // Rotations about e1 leave U0 fixed but turn P0; any nonzero T2, T3 then
  // changes the value, so invariance needs T(t e1) parallel to e1.
  std::vector<Vec3> rows(5, Vec3::Zero());
  for (int j = 1; j < 5; ++j) rows[j] = Vec3(-j, 0.1 * j, 0);
  const TDTable table(Direction::InsertA1IntoA2, 0.5, rows, {});
  const Mat3 R = Eigen::AngleAxisd(0.5 * M_PI, Vec3::UnitX()).toRotationMatrix();
  const Vec3 U(1, 0, 0), P(0, 1, 0);
  CHECK(eval_dJ(table, R.transpose() * U, R.transpose() * P) != doctest::Approx(eval_dJ(table, U, P)));
}

TEST_CASE("out of range policy") {
  const auto table = synthetic_table();
  CHECK_THROWS_AS(eval_dJ(table, Vec3(2.5, 0, 0), Vec3::UnitX()), Error);
  const auto v = eval_dJ(table, Vec3(2.5, 0, 0), Vec3::UnitX(), true);
  CHECK(v.clamped);
  CHECK(v.value == doctest::Approx(table.at(2.0)[0]));
  CHECK_FALSE(eval_dJ(table, Vec3(1.5, 0, 0), Vec3::UnitX(), true).clamped);
}

TEST_CASE("json round trip") {
  auto table = synthetic_table(0.1, 21);
  const auto j = table.to_json();
  CHECK(j.at("rows").size() == 21);
  CHECK(j.at("direction") == "a1-into-a2");
  const auto back = TDTable::from_json(j);
  for (int j2 = 0; j2 < 21; ++j2) CHECK(back.rows()[j2] == table.rows()[j2]);

  const auto path = (std::filesystem::temp_directory_path() / "curltd_table_test.json").string();
  table.save(path);
  const auto loaded = TDTable::load(path);
  CHECK(loaded.at(0.37) == table.at(0.37));
  std::filesystem::remove(path);
  try {
    TDTable::load(path);
    FAIL("expected missing file error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("table not found") != std::string::npos);
  }
  auto broken = j;
  broken["spline_coeffs"]["coeffs"][0][3] = 42.0;
  CHECK_THROWS_AS(TDTable::from_json(broken), Error);
}

TEST_CASE("linear-contrast table") {
  CellSettings cs;
  cs.h = 0.4;
  cs.grading = 1.4;
  cs.epsilon = 0.1;
  const auto dom = CellDomain::build(cs);
  const double nu1 = 200.0, nu2 = kNu0;
  const auto pair = linear_pair(nu1, nu2);
  GridSpec grid{0.25, 2.0};
  const auto table = precompute(pair, Direction::InsertA1IntoA2, grid, dom, {}, 2);
  REQUIRE(table.rows().size() == 9);
  CHECK(table.rows()[0] == Vec3::Zero());
  CHECK(table.provenance().mesh_fingerprint == dom->fingerprint());
  CHECK(table.provenance().material_hash == pair.hash());
  const double factor = 3 * nu2 * (nu1 - nu2) / (2 * nu1 + nu2);
  for (int j = 1; j < 9; ++j) {
    const Vec3& r = table.rows()[j];
    // Coarse cell mesh: only the shape is checked here, the 5% band is an
    // acceptance check on the default mesh.
    CHECK(r[0] == doctest::Approx(factor * table.t(j)).epsilon(0.1));
    CHECK(std::abs(r[1]) <= 0.02 * std::abs(r[0]));
    CHECK(std::abs(r[2]) <= 0.02 * std::abs(r[0]));
  }
  for (double e : leave_one_out(table)) CHECK(e <= 0.01);

  GridSpec bad{0.3, 1.0};
  CHECK_THROWS_AS(precompute(pair, Direction::InsertA1IntoA2, bad, dom), Error);
}

TEST_CASE("failed cell solves are reported") {
  CellSettings cs;
  cs.h = 0.5;
  cs.epsilon = 0.2;
  const auto dom = CellDomain::build(cs);
  SolveSettings s;
  s.max_newton = 1;
  try {
    precompute(saturation_pair(), Direction::InsertA1IntoA2, GridSpec{0.5, 1.5}, dom, s);
    FAIL("expected a partial table");
  } catch (const PartialTable& e) {
    CHECK(e.kind() == Error::Kind::PartialTable);
    CHECK_FALSE(e.failed_t().empty());
    MESSAGE(std::string(e.what()));
  }
}

}  // TEST_SUITE
