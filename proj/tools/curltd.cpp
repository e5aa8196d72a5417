// curltd command-line driver.
#include "curltd/config.hpp"
#include "curltd/parallel.hpp"
#include "curltd/validation.hpp"
#include "curltd/vtk.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

using namespace curltd;
namespace fs = std::filesystem;

namespace {

// 0 success, 1 runtime or study failure, 2 usage or configuration error.
int exit_code(const Error& e) {
  switch (e.kind()) {
    case Error::Kind::Configuration:
    case Error::Kind::Spec:
    case Error::Kind::Domain:
      return 2;
    default:
      return 1;
  }
}

void ensure_parent(const std::string& path) {
  const auto dir = fs::path(path).parent_path();
  if (!dir.empty()) fs::create_directories(dir);
}

int cmd_gen_mesh(const std::string& kind, const std::vector<int>& cells, double h, double eps, double grading,
                 const std::vector<double>& extents, const std::string& out) {
  GeometrySpec g;
  g.kind = geometry_kind_from_string(kind);
  if (g.kind == GeometryKind::ToyMotor) {
    g.extents = Vec3(0.08, 0.05, 0.02);
    g.h = 0.005;
  }
  if (h > 0) g.h = h;
  if (!extents.empty()) {
    if (extents.size() != 3) throw Error(Error::Kind::Spec, "--extents needs three values");
    g.extents = Vec3(extents[0], extents[1], extents[2]);
  }
  if (!cells.empty()) {
    if (cells.size() == 1) g.cells = {cells[0], cells[0], cells[0]};
    else if (cells.size() == 3) g.cells = {cells[0], cells[1], cells[2]};
    else throw Error(Error::Kind::Spec, "--cells needs one or three values");
  }
  if (eps > 0) g.outer_radius = 1.0 / eps;
  if (grading > 0) g.grading = grading;
  const Mesh m = generate(g);
  if (!out.empty()) {
    ensure_parent(out);
    write_mesh_file(out, m);
  }
  double rmax = 0.0;
  for (const auto& v : m.vertices) rmax = std::max(rmax, (v - g.center).norm());
  std::cout << "vertices " << m.num_vertices() << "\ntets " << m.num_tets() << "\nedges " << m.num_edges()
            << "\nboundary_facets " << m.boundary_facets.size() << "\nmax_radius " << rmax << "\nfingerprint "
            << fingerprint(m) << '\n';
  return 0;
}

int cmd_precompute(const RunConfig& cfg, const std::string& only, double nu1_linear, int jobs) {
  const MaterialPair pair = nu1_linear > 0 ? linear_pair(nu1_linear, cfg.material.nu0) : saturation_pair(cfg.material);
  const auto dom = CellDomain::build(cfg.cell);
  std::cout << "cell mesh: " << dom->mesh().num_tets() << " tets, epsilon " << cfg.cell.epsilon << ", "
            << cfg.grid.num_points() << " grid points\n";
  struct Job {
    Direction d;
    std::string path;
  };
  std::vector<Job> todo;
  if (only.empty() || only == "a1-into-a2") todo.push_back({Direction::InsertA1IntoA2, cfg.resolve(cfg.tables.iron_into_air)});
  if (only.empty() || only == "a2-into-a1") todo.push_back({Direction::InsertA2IntoA1, cfg.resolve(cfg.tables.air_into_iron)});
  for (const auto& job : todo) {
    TDTable t = precompute(pair, job.d, cfg.grid, dom, cfg.solve, jobs);
    ensure_parent(job.path);
    t.save(job.path);
    std::cout << to_string(job.d) << ": " << t.rows().size() << " rows -> " << job.path << '\n';
  }
  return 0;
}

int cmd_solve_state(const RunConfig& cfg, const std::string& vtk) {
  MotorModel model(cfg.geometry, saturation_pair(cfg.material), cfg.magnet, cfg.target, cfg.solve);
  const auto state = DesignState::initial(model.mesh);
  const auto res = newton_solve(model.problem(state));
  double bmax = 0.0;
  for (int t = 0; t < model.mesh.num_tets(); ++t) bmax = std::max(bmax, model.disc->curl(res.u, t).norm());
  std::cout << std::setprecision(12) << "tets " << model.mesh.num_tets() << "\nnewton_iterations " << res.iterations
            << "\nresidual " << res.residual << "\nmax_B " << bmax << "\nJ "
            << eval_J(*model.disc, model.objective, res.u) << '\n';
  for (const auto& s : res.log) std::cout << "  it " << s.iteration << " residual " << s.residual << " step " << s.step << '\n';
  if (!vtk.empty()) {
    ensure_parent(vtk);
    VtkFields f;
    std::vector<Vec3> b = model.disc->curls_per_tet(res.u);
    VecX nb(b.size());
    for (std::size_t t = 0; t < b.size(); ++t) nb[t] = b[t].norm();
    f.cell_vectors.push_back({"curl_u", b});
    f.cell_scalars.push_back({"abs_curl_u", nb});
    write_vtk(vtk, model.mesh, f);
  }
  return 0;
}

int cmd_evaluate_td(const std::string& path, const std::vector<double>& u, const std::vector<double>& p, bool clamp) {
  const TDTable t = TDTable::load(path);
  if (u.size() != 3 || p.size() != 3) throw Error(Error::Kind::Configuration, "--U0 and --P0 need three values");
  const auto v = eval_dJ(t, Vec3(u[0], u[1], u[2]), Vec3(p[0], p[1], p[2]), clamp);
  std::cout << std::setprecision(17) << v.value << '\n';
  if (v.clamped) std::cerr << "warning: |U0| clamped to t_max = " << t.t_max() << '\n';
  return 0;
}

int cmd_optimize(RunConfig cfg, bool clamp, int iterations, const std::string& out) {
  if (clamp) cfg.optimize.clamp = true;
  if (iterations >= 0) cfg.optimize.iterations = iterations;
  cfg.optimize.output_dir = out.empty() ? cfg.resolve(cfg.output_dir) : out;
  const TDTable a = TDTable::load(cfg.resolve(cfg.tables.iron_into_air));
  const TDTable b = TDTable::load(cfg.resolve(cfg.tables.air_into_iron));
  if (a.direction() != Direction::InsertA1IntoA2 || b.direction() != Direction::InsertA2IntoA1)
    throw Error(Error::Kind::Configuration, "tables: directions do not match their config entries");
  MotorModel model(cfg.geometry, saturation_pair(cfg.material), cfg.magnet, cfg.target, cfg.solve);
  const RunReport rep = optimize(model, a, b, cfg.optimize);
  std::cout << std::setprecision(12);
  for (const auto& r : rep.history)
    std::cout << "iteration " << r.iteration << " J " << r.J << " iron_fraction " << r.iron_fraction
              << " clamped " << r.clamped << '\n';
  for (const auto& n : rep.notices) std::cout << "notice: " << n << '\n';
  int clamped = 0;
  for (const auto& r : rep.history) clamped += r.clamped;
  std::cout << "clamp_warnings " << clamped << "\noutput " << cfg.optimize.output_dir << '\n';
  std::ofstream js(fs::path(cfg.optimize.output_dir) / "report.json");
  js << std::setprecision(17) << rep.to_json().dump(1) << '\n';
  return 0;
}

int cmd_verify(const std::string& only, const std::string& out, bool quick) {
  const std::vector<std::string> names{"rate", "equivariance", "linear-oracle", "kappa-sensitivity"};
  if (!only.empty() && std::find(names.begin(), names.end(), only) == names.end())
    throw Error(Error::Kind::Configuration, "unknown study '" + only + "'");
  auto selected = [&](const std::string& n) { return only.empty() ? n != "kappa-sensitivity" : only == n; };
  std::vector<StudyReport> reports;
  if (selected("rate")) {
    RateStudyConfig c;
    if (quick) c.core_cells = 3;
    reports.push_back(rate_study_inclusion(c, {0.2, 0.1, 0.05}));
  }
  if (selected("equivariance")) {
    CellSettings cs;
    cs.h = quick ? 0.4 : 0.2;
    cs.grading = 1.4;
    const Mat3 rz = octahedral_rotations()[1];
    Mat3 c3;
    c3 << 0, 0, 1, 1, 0, 0, 0, 1, 0;
    reports.push_back(rotation_equivariance_study(saturation_pair(), Direction::InsertA1IntoA2,
                                                  {Vec3(1.2, 0, 0), Vec3(0.9, 0.5, 0.3)},
                                                  {Mat3::Identity(), rz, c3}, CellDomain::build(cs)));
  }
  if (selected("linear-oracle")) {
    CellSettings cs;
    if (quick) {
      cs.h = 0.25;
      cs.grading = 1.4;
    }
    reports.push_back(linear_oracle_study(200.0, kNu0, Vec3(1, 0, 0), {1.0 / 10, 1.0 / 25, 1.0 / 50}, cs));
  }
  if (selected("kappa-sensitivity")) {
    CellSettings cs;
    cs.h = 0.25;
    cs.grading = 1.4;
    reports.push_back(kappa_sensitivity_study(saturation_pair(), Direction::InsertA1IntoA2, Vec3(1.2, 0, 0),
                                              {1.0, 0.1, 10.0}, CellDomain::build(cs)));
  }
  bool all = true;
  for (const auto& r : reports) {
    r.write(out);
    std::cout << r.name << ": " << (r.pass ? "PASS" : "FAIL");
    for (const auto& [k, v] : r.fitted) std::cout << ' ' << k << '=' << v;
    std::cout << '\n' << r.to_csv();
    all = all && r.pass;
  }
  return all ? 0 : 1;
}

int cmd_export_vtk(const std::string& mesh_path, const std::string& out) {
  const Mesh m = read_mesh_file(mesh_path);
  ensure_parent(out);
  write_vtk(out, m);
  std::cout << "wrote " << out << " (" << m.num_tets() << " tets)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Topological-derivative topology optimisation for 3D nonlinear magnetostatics"};
  app.require_subcommand(1);
  int jobs = 0;
  app.add_option("--jobs", jobs, "worker threads (default: CURLTD_JOBS or 1)");

  auto* gen = app.add_subcommand("gen-mesh", "generate a mesh");
  std::string kind, mesh_out;
  std::vector<int> cells;
  std::vector<double> extents;
  double h = -1, eps = -1, grading = -1;
  gen->add_option("--kind", kind, "box | toy-motor | graded-ball | inclusion-box")->required();
  gen->add_option("--cells", cells, "box cell counts (one or three)");
  gen->add_option("--size", h, "mesh size h");
  gen->add_option("--eps", eps, "graded ball truncation (outer radius 1/eps)");
  gen->add_option("--grading", grading, "shell grading factor");
  gen->add_option("--extents", extents, "box extents")->expected(3);
  gen->add_option("--out", mesh_out, "output mesh file");

  auto* pre = app.add_subcommand("precompute", "offline TD tables for both insertion directions");
  std::string config;
  std::string direction;
  double t_max = -1, dt = -1, cell_h = -1, cell_eps = -1, nu1 = -1;
  pre->add_option("--config", config, "run config")->required()->check(CLI::ExistingFile);
  pre->add_option("--t-max", t_max, "grid end");
  pre->add_option("--dt", dt, "grid spacing");
  pre->add_option("--cell-h", cell_h, "cell mesh size");
  pre->add_option("--eps", cell_eps, "cell truncation");
  pre->add_option("--direction", direction, "only one direction")->check(CLI::IsMember({"a1-into-a2", "a2-into-a1"}));
  pre->add_option("--linear-nu1", nu1, "replace a1 by the linear law nu1 y");

  auto* solve = app.add_subcommand("solve-state", "solve the state on the initial design");
  std::string vtk_out;
  solve->add_option("--config", config, "run config")->required()->check(CLI::ExistingFile);
  solve->add_option("--vtk", vtk_out, "write the field as VTK");

  auto* ev = app.add_subcommand("evaluate-td", "evaluate dJ(U0, P0) from a table");
  std::string table;
  std::vector<double> U0, P0;
  bool clamp = false;
  ev->add_option("--table", table, "table JSON")->required();
  ev->add_option("--U0", U0, "background curl")->expected(3)->required();
  ev->add_option("--P0", P0, "adjoint curl")->expected(3)->required();
  ev->add_flag("--clamp", clamp, "clamp |U0| to the table range");

  auto* opt = app.add_subcommand("optimize", "one-shot level-set optimisation");
  int iterations = -1;
  std::string out_dir;
  opt->add_option("--config", config, "run config")->required()->check(CLI::ExistingFile);
  opt->add_flag("--clamp", clamp, "clamp out-of-range |U0| instead of aborting");
  opt->add_option("--iterations", iterations, "number of updates (default from config)");
  opt->add_option("--out", out_dir, "output directory (default from config)");

  auto* ver = app.add_subcommand("verify", "run the validation studies");
  std::string only, report_dir = "reports";
  bool quick = false;
  ver->add_option("--only", only, "rate | equivariance | linear-oracle | kappa-sensitivity");
  ver->add_option("--out", report_dir, "report directory");
  ver->add_flag("--quick", quick, "coarser meshes");

  auto* exp = app.add_subcommand("export-vtk", "convert a mesh file to legacy VTK");
  std::string mesh_in, vtk_file;
  exp->add_option("--mesh", mesh_in, "mesh file")->required();
  exp->add_option("--out", vtk_file, "VTK file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const int j = resolve_jobs(jobs);
    if (*gen) return cmd_gen_mesh(kind, cells, h, eps, grading, extents, mesh_out);
    if (*ev) return cmd_evaluate_td(table, U0, P0, clamp);
    if (*ver) return cmd_verify(only, report_dir, quick);
    if (*exp) return cmd_export_vtk(mesh_in, vtk_file);
    RunConfig cfg = RunConfig::load(config);
    if (*pre) {
      if (t_max > 0) cfg.grid.t_max = t_max;
      if (dt > 0) cfg.grid.delta_t = dt;
      if (cell_h > 0) cfg.cell.h = cell_h;
      if (cell_eps > 0) cfg.cell.epsilon = cell_eps;
      cfg.grid.validate();
      return cmd_precompute(cfg, direction, nu1, j);
    }
    if (*solve) return cmd_solve_state(cfg, vtk_out);
    if (*opt) return cmd_optimize(cfg, clamp, iterations, out_dir);
  } catch (const PartialTable& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
