#include "curltd/optimizer.hpp"

#include "curltd/vtk.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace curltd {

const char* to_string(TargetMode m) { return m == TargetMode::Vector ? "vector" : "normal"; }

TargetMode target_mode_from_string(const std::string& name) {
  if (name == "vector") return TargetMode::Vector;
  if (name == "normal") return TargetMode::Normal;
  throw Error(Error::Kind::Configuration, "unknown target mode '" + name + "'");
}

void ObjectiveSpec::validate() const {
  if (tets.empty()) throw Error(Error::Kind::Configuration, std::string("objective: no tets tagged ") + to_string(gap));
  const std::size_t n = tets.size();
  if (mode == TargetMode::Vector) {
    if (target.size() != n) throw Error(Error::Kind::Configuration, "objective: target size mismatch");
  } else {
    if (target_normal.size() != n || normal.size() != n)
      throw Error(Error::Kind::Configuration, "objective: target size mismatch");
    for (const auto& v : normal)
      if (std::abs(v.norm() - 1.0) > 1e-12) throw Error(Error::Kind::Configuration, "objective: normal not unit");
  }
}

namespace {

std::vector<int> tagged(const Mesh& mesh, Region gap) {
  std::vector<int> out;
  for (int t = 0; t < mesh.num_tets(); ++t)
    if (mesh.region[t] == gap) out.push_back(t);
  if (out.empty()) throw Error(Error::Kind::Configuration, std::string("objective: no tets tagged ") + to_string(gap));
  return out;
}

// Mismatch gradient w.r.t. the tet curl: 2 (B - Bd) or 2 (B.n - Bdn) n.
Vec3 mismatch_gradient(const ObjectiveSpec& spec, std::size_t i, const Vec3& b) {
  if (spec.mode == TargetMode::Vector) return 2.0 * (b - spec.target[i]);
  return 2.0 * (b.dot(spec.normal[i]) - spec.target_normal[i]) * spec.normal[i];
}

}  // namespace

ObjectiveSpec vector_objective(const Mesh& mesh, Region gap, const std::function<Vec3(const Vec3&)>& target) {
  ObjectiveSpec s;
  s.gap = gap;
  s.mode = TargetMode::Vector;
  s.tets = tagged(mesh, gap);
  for (int t : s.tets) s.target.push_back(target(mesh.centroid(t)));
  return s;
}

ObjectiveSpec normal_objective(const Mesh& mesh, Region gap, const std::function<double(const Vec3&)>& target,
                               const std::function<Vec3(const Vec3&)>& normal) {
  ObjectiveSpec s;
  s.gap = gap;
  s.mode = TargetMode::Normal;
  s.tets = tagged(mesh, gap);
  for (int t : s.tets) {
    const Vec3 c = mesh.centroid(t);
    s.target_normal.push_back(target(c));
    s.normal.push_back(normal(c).normalized());
  }
  s.validate();
  return s;
}

double eval_J(const Discretization& disc, const ObjectiveSpec& spec, const VecX& u) {
  spec.validate();
  double J = 0.0;
  for (std::size_t i = 0; i < spec.tets.size(); ++i) {
    const int t = spec.tets[i];
    const Vec3 b = disc.curl(u, t);
    const double m = spec.mode == TargetMode::Vector ? (b - spec.target[i]).squaredNorm()
                                                     : std::pow(b.dot(spec.normal[i]) - spec.target_normal[i], 2);
    J += disc.volume(t) * m;
  }
  return J;
}

VecX objective_gradient(const Discretization& disc, const ObjectiveSpec& spec, const VecX& u) {
  spec.validate();
  const Mesh& mesh = disc.mesh();
  VecX g = VecX::Zero(disc.num_edges());
  for (std::size_t i = 0; i < spec.tets.size(); ++i) {
    const int t = spec.tets[i];
    const Vec3 w = disc.volume(t) * mismatch_gradient(spec, i, disc.curl(u, t));
    const auto& c = disc.curls(t);
    for (int k = 0; k < 6; ++k) g[mesh.tet_edges[t][k].index] += w.dot(c[k]);
  }
  for (int e = 0; e < g.size(); ++e)
    if (disc.dofs().constrained[e]) g[e] = 0.0;
  return g;
}

VecX solve_adjoint(const Problem& problem, const VecX& u, const ObjectiveSpec& spec) {
  const VecX rhs = -objective_gradient(*problem.disc, spec, u);
  if (rhs.norm() == 0.0) return VecX::Zero(rhs.size());
  SpdSolver solver(*problem.disc, problem.settings.kappa);
  solver.compute(assemble_jacobian(problem, u));
  return solver.solve(rhs, problem.settings.linear_tol);
}

DesignState DesignState::initial(const Mesh& mesh, Region design_tag, double psi0) {
  DesignState s;
  s.psi = VecX::Constant(mesh.num_vertices(), psi0);
  s.base_region = mesh.region;
  s.design.assign(mesh.num_tets(), 0);
  for (int t = 0; t < mesh.num_tets(); ++t) s.design[t] = mesh.region[t] == design_tag;
  if (s.num_design_tets() == 0) throw Error(Error::Kind::Configuration, "design region is empty");
  s.tet_vertices_ = mesh.tets;
  return s;
}

Region DesignState::region(int t) const {
  if (!design[t]) return base_region[t];
  const auto& v = tet_vertices_[t];
  const double mean = 0.25 * (psi[v[0]] + psi[v[1]] + psi[v[2]] + psi[v[3]]);
  return mean > 0.0 ? Region::Iron : Region::Air;
}

std::vector<Region> DesignState::regions() const {
  std::vector<Region> r(design.size());
  for (std::size_t t = 0; t < r.size(); ++t) r[t] = region(static_cast<int>(t));
  return r;
}

std::vector<Side> DesignState::sides(const SideMap& map) const {
  std::vector<Side> out(design.size());
  for (std::size_t t = 0; t < out.size(); ++t) {
    const auto& s = map[static_cast<int>(region(static_cast<int>(t)))];
    if (!s) throw Error(Error::Kind::Configuration, "side map does not cover the design regions");
    out[t] = *s;
  }
  return out;
}

double DesignState::iron_fraction(const Mesh& mesh) const {
  double iron = 0.0, all = 0.0;
  for (int t = 0; t < mesh.num_tets(); ++t) {
    if (!design[t]) continue;
    const double v = tet_volume(mesh, t);
    all += v;
    if (region(t) == Region::Iron) iron += v;
  }
  return iron / all;
}

int DesignState::num_design_tets() const {
  int n = 0;
  for (char d : design) n += d;
  return n;
}

nlohmann::json DesignState::to_json() const {
  std::vector<int> regions_int;
  for (auto r : regions()) regions_int.push_back(static_cast<int>(r));
  std::vector<int> design_int(design.begin(), design.end());
  return {{"iteration", iteration},
          {"J", J},
          {"psi", std::vector<double>(psi.begin(), psi.end())},
          {"design", design_int},
          {"region", regions_int}};
}

TDField td_field(const Discretization& disc, const TDTable& iron_into_air, const TDTable& air_into_iron,
                 const VecX& u, const VecX& p, const DesignState& state, bool clamp) {
  if (iron_into_air.direction() != Direction::InsertA1IntoA2 ||
      air_into_iron.direction() != Direction::InsertA2IntoA1)
    throw Error(Error::Kind::Configuration, "td_field: tables are given in the wrong order");
  const Mesh& mesh = disc.mesh();
  TDField f;
  f.values = VecX::Zero(mesh.num_tets());
  int out_of_range = 0;
  for (int t = 0; t < mesh.num_tets(); ++t) {
    if (!state.design[t]) continue;
    const Vec3 U0 = disc.curl(u, t);
    const Vec3 P0 = disc.curl(p, t);
    const TDTable& table = state.region(t) == Region::Air ? iron_into_air : air_into_iron;
    f.max_U0 = std::max(f.max_U0, U0.norm());
    if (U0.norm() > table.t_max() && !clamp) {
      ++out_of_range;
      continue;
    }
    const TDValue v = eval_dJ(table, U0, P0, clamp);
    f.values[t] = v.value;
    f.clamped += v.clamped;
  }
  if (out_of_range > 0) {
    std::ostringstream os;
    os << "td_field: " << out_of_range << " design tets have |curl u| beyond the table range (max "
       << f.max_U0 << " T); rerun with the clamp flag to evaluate at t_max";
    throw Error(Error::Kind::OutOfRange, os.str());
  }
  return f;
}

LevelSetUpdate levelset_update(const DesignState& state, const Discretization& disc, const VecX& td, double s) {
  if (!(s > 0.0 && s < 1.0)) throw Error(Error::Kind::Domain, "levelset_update: s must lie in (0, 1)");
  const Mesh& mesh = disc.mesh();
  const int nv = mesh.num_vertices();
  VecX g = VecX::Zero(nv), w = VecX::Zero(nv);
  for (int t = 0; t < mesh.num_tets(); ++t) {
    if (!state.design[t]) continue;
    const double gt = state.region(t) == Region::Iron ? td[t] : -td[t];
    for (int v : mesh.tets[t]) {
      g[v] += disc.volume(t) * gt;
      w[v] += disc.volume(t);
    }
  }
  // L2 norm of the P1 interpolant over the design, exact P1 mass.
  double n2 = 0.0;
  for (int t = 0; t < mesh.num_tets(); ++t) {
    if (!state.design[t]) continue;
    const auto& v = mesh.tets[t];
    double sum = 0.0, sq = 0.0;
    for (int a = 0; a < 4; ++a) {
      const double ga = w[v[a]] > 0.0 ? g[v[a]] / w[v[a]] : 0.0;
      sum += ga;
      sq += ga * ga;
    }
    n2 += disc.volume(t) / 20.0 * (sq + sum * sum);
  }
  LevelSetUpdate out;
  out.state = state;
  out.norm = std::sqrt(n2);
  if (!(out.norm > 0.0)) {
    out.notice = "levelset_update: topological derivative vanishes on the design region; state unchanged";
    return out;
  }
  for (int v = 0; v < nv; ++v)
    if (w[v] > 0.0) out.state.psi[v] = (1.0 - s) * state.psi[v] + s * (g[v] / w[v]) / out.norm;
  out.state.iteration = state.iteration + 1;
  out.changed = out.state.regions() != state.regions();
  return out;
}

std::vector<Vec3> magnetization(const Mesh& mesh, const MagnetSpec& spec, double length_x) {
  if (spec.poles < 1) throw Error(Error::Kind::Configuration, "magnet: need at least one pole");
  std::vector<Vec3> m(mesh.num_tets(), Vec3::Zero());
  for (int t = 0; t < mesh.num_tets(); ++t) {
    if (mesh.region[t] != Region::Magnet) continue;
    const int k = std::min(spec.poles - 1, static_cast<int>(mesh.centroid(t)[0] / length_x * spec.poles));
    m[t] = (k % 2 == 0 ? 1.0 : -1.0) * spec.magnitude * spec.direction;
  }
  return m;
}

ObjectiveSpec TargetSpec::build(const Mesh& mesh, double length_x) const {
  auto profile = [this, length_x](const Vec3& x) {
    return amplitude * std::sin(2.0 * std::numbers::pi * periods * x[0] / length_x + phase);
  };
  if (mode == TargetMode::Vector)
    return vector_objective(mesh, Region::AirGap, [&](const Vec3& x) { return Vec3(profile(x) * direction); });
  return normal_objective(mesh, Region::AirGap, profile, [&](const Vec3&) { return direction; });
}

MotorModel::MotorModel(Mesh m, MaterialPair p, const MagnetSpec& magnet, const TargetSpec& target,
                       const SolveSettings& s)
    : mesh(std::move(m)), pair(std::move(p)), solve(s) {
  disc = std::make_unique<Discretization>(mesh);
  double lx = 0.0;
  for (const auto& v : mesh.vertices) lx = std::max(lx, v[0]);
  source = magnetization(mesh, magnet, lx);
  objective = target.build(mesh, lx);
}

MotorModel::MotorModel(const GeometrySpec& geometry, MaterialPair p, const MagnetSpec& magnet,
                       const TargetSpec& target, const SolveSettings& s)
    : MotorModel(generate(geometry), std::move(p), magnet, target, s) {}

Problem MotorModel::problem(const DesignState& state) const {
  Problem p;
  p.disc = disc.get();
  p.pair = pair;
  p.sides = state.sides();
  p.source = source;
  p.settings = solve;
  return p;
}

std::vector<double> RunReport::J() const {
  std::vector<double> out;
  for (const auto& h : history) out.push_back(h.J);
  return out;
}

nlohmann::json RunReport::to_json() const {
  nlohmann::json h = nlohmann::json::array();
  for (const auto& r : history)
    h.push_back({{"iteration", r.iteration},
                 {"J", r.J},
                 {"iron_fraction", r.iron_fraction},
                 {"newton_iterations", r.newton_iterations},
                 {"td_norm", r.td_norm},
                 {"clamped", r.clamped}});
  return {{"history", h}, {"notices", notices}};
}

namespace {

template <typename F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const NonConvergence& e) {
    throw NonConvergence(std::string("stage ") + name + ": " + e.what(), e.log());
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("stage ") + name + ": " + e.what());
  }
}

void snapshot(const std::string& dir, int k, const MotorModel& model, const DesignState& state, const VecX& u,
              const VecX* td) {
  const Mesh& mesh = model.mesh;
  Mesh view = mesh;
  view.region = state.regions();
  VtkFields f;
  f.point_scalars.push_back({"psi", state.psi});
  VecX b(mesh.num_tets());
  std::vector<Vec3> bv(mesh.num_tets());
  for (int t = 0; t < mesh.num_tets(); ++t) {
    bv[t] = model.disc->curl(u, t);
    b[t] = bv[t].norm();
  }
  f.cell_scalars.push_back({"abs_curl_u", b});
  f.cell_scalars.push_back({"td", td ? *td : VecX::Zero(mesh.num_tets())});
  f.cell_vectors.push_back({"curl_u", bv});
  write_vtk((std::filesystem::path(dir) / ("snapshot_" + std::to_string(k) + ".vtk")).string(), view, f);
}

}  // namespace

RunReport optimize(const MotorModel& model, const TDTable& iron_into_air, const TDTable& air_into_iron,
                   const OptimizeSettings& settings) {
  if (settings.iterations < 0) throw Error(Error::Kind::Configuration, "optimize: negative iteration count");
  if (settings.iterations > 0 && !(settings.s > 0.0 && settings.s < 1.0))
    throw Error(Error::Kind::Domain, "optimize: s must lie in (0, 1)");
  const bool write = !settings.output_dir.empty();
  if (write) std::filesystem::create_directories(settings.output_dir);

  RunReport report;
  DesignState state = DesignState::initial(model.mesh);
  const Discretization& disc = *model.disc;

  auto solve_state = [&](const VecX* start) {
    return stage("solve-state", [&] {
      const Problem p = model.problem(state);
      return start ? newton_solve(p, *start) : newton_solve(p);
    });
  };

  NewtonResult st = solve_state(nullptr);
  state.J = stage("objective", [&] { return eval_J(disc, model.objective, st.u); });
  report.history.push_back({0, state.J, state.iron_fraction(model.mesh), st.iterations, 0.0, 0});
  if (write) snapshot(settings.output_dir, 0, model, state, st.u, nullptr);

  for (int k = 1; k <= settings.iterations; ++k) {
    const VecX p = stage("adjoint", [&] { return solve_adjoint(model.problem(state), st.u, model.objective); });
    const TDField td = stage("td-field", [&] {
      return td_field(disc, iron_into_air, air_into_iron, st.u, p, state, settings.clamp);
    });
    const LevelSetUpdate up = stage("levelset-update", [&] { return levelset_update(state, disc, td.values, settings.s); });
    if (!up.notice.empty()) report.notices.push_back(up.notice);
    if (td.clamped > 0)
      report.notices.push_back("iteration " + std::to_string(k) + ": " + std::to_string(td.clamped) +
                               " tets clamped to the table range");
    if (write) snapshot(settings.output_dir, k - 1, model, state, st.u, &td.values);
    state = up.state;
    state.iteration = k;
    st = solve_state(&st.u);
    state.J = stage("objective", [&] { return eval_J(disc, model.objective, st.u); });
    report.history.push_back({k, state.J, state.iron_fraction(model.mesh), st.iterations, up.norm, td.clamped});
    if (write) snapshot(settings.output_dir, k, model, state, st.u, nullptr);
  }
  report.final_state = state;
  report.u = st.u;

  if (write) {
    std::ofstream csv(std::filesystem::path(settings.output_dir) / "j_history.csv");
    csv << "iteration,J,iron_fraction,newton_iterations,td_norm,clamped\n" << std::setprecision(17);
    for (const auto& r : report.history)
      csv << r.iteration << ',' << r.J << ',' << r.iron_fraction << ',' << r.newton_iterations << ','
          << r.td_norm << ',' << r.clamped << '\n';
    std::ofstream js(std::filesystem::path(settings.output_dir) / "design_state.json");
    js << std::setprecision(17) << state.to_json().dump(1) << '\n';
  }
  return report;
}

}  // namespace curltd
