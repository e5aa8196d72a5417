#include "curltd/cell_problem.hpp"

#include <cmath>
#include <sstream>

namespace curltd {

const char* to_string(Direction d) {
  return d == Direction::InsertA1IntoA2 ? "a1-into-a2" : "a2-into-a1";
}

Direction direction_from_string(const std::string& name) {
  if (name == "a1-into-a2") return Direction::InsertA1IntoA2;
  if (name == "a2-into-a1") return Direction::InsertA2IntoA1;
  throw Error(Error::Kind::Configuration, "unknown insertion direction '" + name + "'");
}

GeometrySpec CellSettings::geometry() const {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw Error(Error::Kind::Spec, "cell truncation epsilon must lie in (0, 1)");
  GeometrySpec g;
  g.kind = GeometryKind::GradedBall;
  g.h = h;
  g.grading = grading;
  g.outer_radius = 1.0 / epsilon;
  return g;
}

CellDomain::CellDomain(Mesh mesh, double epsilon) : mesh_(std::move(mesh)), epsilon_(epsilon) {
  inclusion_volume_ = volume(mesh_, Region::Inclusion);
  if (!(inclusion_volume_ > 0.0))
    throw Error(Error::Kind::Configuration, "cell mesh has no INCLUSION tets");
  disc_ = std::make_unique<Discretization>(mesh_);
  fingerprint_ = curltd::fingerprint(mesh_);
}

std::shared_ptr<const CellDomain> CellDomain::build(const CellSettings& settings) {
  return std::make_shared<const CellDomain>(generate(settings.geometry()), settings.epsilon);
}

const MaterialLaw& inner_law(const MaterialPair& pair, Direction d) {
  return d == Direction::InsertA1IntoA2 ? pair.a1 : pair.a2;
}

const MaterialLaw& outer_law(const MaterialPair& pair, Direction d) {
  return d == Direction::InsertA1IntoA2 ? pair.a2 : pair.a1;
}

namespace {

Problem cell_problem(const CellDomain& dom, const MaterialPair& pair, Direction direction,
                     const Vec3& U0, const SolveSettings& settings) {
  const Mesh& mesh = dom.mesh();
  const Side in = direction == Direction::InsertA1IntoA2 ? Side::One : Side::Two;
  const Side out = in == Side::One ? Side::Two : Side::One;
  Problem p;
  p.disc = &dom.disc();
  p.pair = pair;
  p.background = U0;
  p.subtract_background = true;
  p.settings = settings;
  p.sides.resize(mesh.num_tets());
  p.source.assign(mesh.num_tets(), Vec3::Zero());
  // The jump of the laws at U0 enters as a magnetisation-like load on omega.
  const Vec3 jump = inner_law(pair, direction).eval(U0) - outer_law(pair, direction).eval(U0);
  for (int t = 0; t < mesh.num_tets(); ++t) {
    const bool inside = dom.in_inclusion(t);
    p.sides[t] = inside ? in : out;
    if (inside) p.source[t] = -jump;
  }
  return p;
}

}  // namespace

CellSolution solve_cell(std::shared_ptr<const CellDomain> domain, const MaterialPair& pair,
                        Direction direction, const Vec3& U0, const SolveSettings& settings) {
  if (!domain) throw Error(Error::Kind::Configuration, "solve_cell without a cell domain");
  const Problem p = cell_problem(*domain, pair, direction, U0, settings);
  NewtonResult res = newton_solve(p);
  CellSolution sol;
  sol.domain = std::move(domain);
  sol.U0 = U0;
  sol.direction = direction;
  sol.K = std::move(res.u);
  sol.iterations = res.iterations;
  sol.residual = res.residual;
  sol.log = std::move(res.log);
  return sol;
}

TDVector evaluate_td_vector(const CellSolution& sol, const MaterialPair& pair) {
  const CellDomain& dom = *sol.domain;
  const Mesh& mesh = dom.mesh();
  const Discretization& disc = dom.disc();
  const MaterialLaw& a_in = inner_law(pair, sol.direction);
  const MaterialLaw& a_out = outer_law(pair, sol.direction);
  const Vec3& U0 = sol.U0;

  const Vec3 ain_u0 = a_in.eval(U0), aout_u0 = a_out.eval(U0);
  const Mat3 din_u0 = a_in.jacobian(U0), dout_u0 = a_out.jacobian(U0);

  Vec3 r1 = Vec3::Zero();
  Vec3 r2 = Vec3::Zero();
  for (int t = 0; t < mesh.num_tets(); ++t) {
    const Vec3 ck = disc.curl(sol.K, t);
    const double vol = disc.volume(t);
    const bool inside = dom.in_inclusion(t);
    const MaterialLaw& law = inside ? a_in : a_out;
    const Vec3& a_u0 = inside ? ain_u0 : aout_u0;
    const Mat3& da_u0 = inside ? din_u0 : dout_u0;
    r1 += vol * (law.eval(ck + U0) - a_u0 - da_u0 * ck);
    if (inside) r2 += vol * ((din_u0 - dout_u0) * ck);
  }
  TDVector td;
  td.first_term = ain_u0 - aout_u0;
  td.R1 = r1 / dom.inclusion_volume();
  td.R2 = r2 / dom.inclusion_volume();
  td.T = td.first_term + td.R1 + td.R2;
  return td;
}

EpsilonStudy epsilon_study(const MaterialPair& pair, Direction direction, const Vec3& U0,
                           const std::vector<double>& eps, const CellSettings& base,
                           std::size_t max_tets) {
  if (eps.empty()) throw Error(Error::Kind::Configuration, "epsilon study needs at least one value");
  for (size_t i = 1; i < eps.size(); ++i)
    if (!(eps[i] < eps[i - 1]))
      throw Error(Error::Kind::Configuration, "epsilon list must be strictly decreasing");

  std::vector<std::size_t> counts;
  for (size_t i = 0; i < eps.size(); ++i) {
    CellSettings s = base;
    s.epsilon = eps[i];
    counts.push_back(estimated_tets(s.geometry()));
    if (counts.back() > max_tets) {
      std::ostringstream os;
      os << "cell mesh for epsilon " << eps[i] << " needs " << counts.back() << " tets (budget "
         << max_tets << ")";
      if (i > 0) os << "; largest feasible epsilon in the list is " << eps[i - 1];
      else os << "; no epsilon in the list is feasible";
      throw Error(Error::Kind::Resource, os.str());
    }
  }

  EpsilonStudy study;
  for (size_t i = 0; i < eps.size(); ++i) {
    CellSettings s = base;
    s.epsilon = eps[i];
    auto dom = CellDomain::build(s);
    const auto sol = solve_cell(dom, pair, direction, U0, s.solve);
    EpsilonRow row;
    row.epsilon = eps[i];
    row.td = evaluate_td_vector(sol, pair);
    row.tets = counts[i];
    if (i > 0) row.cauchy = (row.td.T - study.rows.back().td.T).norm();
    study.rows.push_back(row);
  }
  return study;
}

nlohmann::json to_json(const Vec3& v) { return nlohmann::json::array({v[0], v[1], v[2]}); }

Vec3 vec3_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3)
    throw Error(Error::Kind::Configuration, "expected a 3-vector, got " + j.dump());
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

nlohmann::json cell_record(const CellSolution& sol, const TDVector& td) {
  return {
      {"U0", to_json(sol.U0)},
      {"direction", to_string(sol.direction)},
      {"epsilon", sol.domain->epsilon()},
      {"T", to_json(td.T)},
      {"parts", {{"first_term", to_json(td.first_term)}, {"R1", to_json(td.R1)}, {"R2", to_json(td.R2)}}},
      {"residual", sol.residual},
      {"iterations", sol.iterations},
      {"mesh_fingerprint", sol.domain->fingerprint()},
  };
}

}  // namespace curltd
