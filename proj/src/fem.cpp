#include "curltd/fem.hpp"

#include "curltd/whitney.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace curltd {

void SolveSettings::validate() const {
  if (!(kappa > 0.0 && newton_tol > 0.0 && linear_tol > 0.0 && max_newton > 0 &&
        line_search_halvings > 0)) {
    throw Error(Error::Kind::Configuration, "solve settings must all be positive");
  }
}

DofMap DofMap::dirichlet(const Mesh& mesh) {
  DofMap d;
  d.n_edges = mesh.num_edges();
  d.constrained.assign(d.n_edges, false);
  for (const auto& bf : mesh.boundary_facets) {
    if (bf.tag != BoundaryTag::Dirichlet) continue;
    for (int k = 0; k < 6; ++k) {
      const int a = kLocalEdges[k][0], b = kLocalEdges[k][1];
      if (a != bf.face && b != bf.face) d.constrained[mesh.tet_edges[bf.tet][k].index] = true;
    }
  }
  for (int e = 0; e < d.n_edges; ++e)
    if (!d.constrained[e]) d.free.push_back(e);
  return d;
}

SideMap default_side_map() {
  SideMap m;
  m[static_cast<int>(Region::Air)] = Side::Two;
  m[static_cast<int>(Region::Iron)] = Side::One;
  m[static_cast<int>(Region::Magnet)] = Side::Two;
  m[static_cast<int>(Region::AirGap)] = Side::Two;
  return m;
}

std::vector<Side> assign_sides(const Mesh& mesh, const SideMap& map) {
  std::vector<Side> sides(mesh.num_tets());
  for (int t = 0; t < mesh.num_tets(); ++t) {
    const auto& s = map[static_cast<int>(mesh.region[t])];
    if (!s) {
      throw Error(Error::Kind::Configuration,
                  std::string("region '") + to_string(mesh.region[t]) + "' has no material side");
    }
    sides[t] = *s;
  }
  return sides;
}

Discretization::Discretization(const Mesh& mesh) : mesh_(&mesh), dofs_(DofMap::dirichlet(mesh)) {
  const int nt = mesh.num_tets();
  volume_.resize(nt);
  curls_.resize(nt);
  mass_.resize(nt);
  for (int t = 0; t < nt; ++t) {
    const auto frame = tet_frame<double>(mesh, t);
    const auto c = local_curls(frame);
    auto m = local_mass(frame);
    const auto& te = mesh.tet_edges[t];
    for (int k = 0; k < 6; ++k) {
      curls_[t][k] = te[k].sign * c[k];
      for (int l = 0; l < 6; ++l) m(k, l) *= te[k].sign * te[l].sign;
    }
    volume_[t] = frame.volume;
    mass_[t] = m;
  }
}

Eigen::Matrix<double, 6, 1> Discretization::gather(const VecX& u, int t) const {
  Eigen::Matrix<double, 6, 1> v;
  const auto& te = mesh_->tet_edges[t];
  for (int k = 0; k < 6; ++k) v[k] = u[te[k].index];
  return v;
}

Vec3 Discretization::curl(const VecX& u, int t) const {
  Vec3 c = Vec3::Zero();
  const auto& te = mesh_->tet_edges[t];
  for (int k = 0; k < 6; ++k) c += u[te[k].index] * curls_[t][k];
  return c;
}

std::vector<Vec3> Discretization::curls_per_tet(const VecX& u) const {
  std::vector<Vec3> out(mesh_->num_tets());
  for (int t = 0; t < mesh_->num_tets(); ++t) out[t] = curl(u, t);
  return out;
}

SparseMatrix Discretization::mass_matrix() const {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(mesh_->num_tets()) * 36);
  for (int t = 0; t < mesh_->num_tets(); ++t) {
    const auto& te = mesh_->tet_edges[t];
    for (int k = 0; k < 6; ++k)
      for (int l = 0; l < 6; ++l) trip.emplace_back(te[k].index, te[l].index, mass_[t](k, l));
  }
  SparseMatrix m(num_edges(), num_edges());
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

SparseMatrix Discretization::gradient_matrix() const {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(2 * static_cast<size_t>(num_edges()));
  for (int e = 0; e < num_edges(); ++e) {
    trip.emplace_back(e, mesh_->edges[e][0], -1.0);
    trip.emplace_back(e, mesh_->edges[e][1], 1.0);
  }
  SparseMatrix g(num_edges(), mesh_->num_vertices());
  g.setFromTriplets(trip.begin(), trip.end());
  return g;
}

struct GradientSpace {
  double kappa = 0.0;
  SparseMatrix grad;  // free edges x free vertices, zero rows on constrained edges
  Eigen::SimplicialLDLT<SparseMatrix> laplace;
};

std::shared_ptr<const GradientSpace> Discretization::gradient_space(double kappa) const {
  std::lock_guard<std::mutex> lock(*gspace_mutex_);
  if (gspace_ && gspace_->kappa == kappa) return gspace_;
  auto gs = std::make_shared<GradientSpace>();
  gs->kappa = kappa;
  const auto fixed = dirichlet_vertices(*mesh_);
  std::vector<int> id(mesh_->num_vertices(), -1);
  int nfree = 0;
  for (int v = 0; v < mesh_->num_vertices(); ++v)
    if (!fixed[v]) id[v] = nfree++;
  std::vector<Eigen::Triplet<double>> trip;
  for (int e = 0; e < num_edges(); ++e) {
    if (dofs_.constrained[e]) continue;
    const int a = id[mesh_->edges[e][0]], b = id[mesh_->edges[e][1]];
    if (a >= 0) trip.emplace_back(e, a, -1.0);
    if (b >= 0) trip.emplace_back(e, b, 1.0);
  }
  gs->grad.resize(num_edges(), nfree);
  gs->grad.setFromTriplets(trip.begin(), trip.end());
  // curl grad = 0, so G^T J G only sees the kappa mass term.
  const SparseMatrix lap = kappa * SparseMatrix(gs->grad.transpose() * mass_matrix() * gs->grad);
  if (nfree > 0) {
    gs->laplace.compute(lap);
    if (gs->laplace.info() != Eigen::Success)
      throw Error(Error::Kind::Solver, "nodal Laplacian factorisation failed");
  }
  gspace_ = gs;
  return gspace_;
}

Vec3 Problem::field_intensity(int t, const Vec3& curl_u) const {
  const MaterialLaw& law = pair.law(sides[t]);
  Vec3 h = law.eval(curl_u + background);
  if (subtract_background) h -= law.eval(background);
  return h;
}

Mat3 Problem::field_jacobian(int t, const Vec3& curl_u) const {
  return pair.law(sides[t]).jacobian(curl_u + background);
}

namespace {

void check_problem(const Problem& p, const VecX& u) {
  if (p.disc == nullptr) throw Error(Error::Kind::Configuration, "problem without discretisation");
  const Mesh& mesh = p.disc->mesh();
  if (u.size() != mesh.num_edges())
    throw Error(Error::Kind::Configuration, "field size does not match the mesh");
  if (static_cast<int>(p.sides.size()) != mesh.num_tets())
    throw Error(Error::Kind::Configuration, "material map does not cover every tet");
  if (!p.source.empty() && static_cast<int>(p.source.size()) != mesh.num_tets())
    throw Error(Error::Kind::Configuration, "source must be given per tet");
}

}  // namespace

VecX assemble_residual(const Problem& p, const VecX& u) {
  check_problem(p, u);
  const Discretization& d = *p.disc;
  const Mesh& mesh = d.mesh();
  VecX r = VecX::Zero(mesh.num_edges());
  const double kappa = p.settings.kappa;
  for (int t = 0; t < mesh.num_tets(); ++t) {
    const auto& te = mesh.tet_edges[t];
    const auto& c = d.curls(t);
    const double vol = d.volume(t);
    // The curl is constant per tet, so the integrand of the nonlinear term is too.
    Vec3 flux = d.curl(u, t);
    Vec3 h = p.field_intensity(t, flux);
    if (!p.source.empty()) h -= p.source[t];
    const Eigen::Matrix<double, 6, 1> mu = kappa * (d.mass(t) * d.gather(u, t));
    for (int k = 0; k < 6; ++k) r[te[k].index] += vol * h.dot(c[k]) + mu[k];
  }
  const auto& dofs = d.dofs();
  for (int e = 0; e < dofs.n_edges; ++e)
    if (dofs.constrained[e]) r[e] = 0.0;
  return r;
}

SparseMatrix assemble_jacobian(const Problem& p, const VecX& u) {
  check_problem(p, u);
  const Discretization& d = *p.disc;
  const Mesh& mesh = d.mesh();
  const auto& constrained = d.dofs().constrained;
  const double kappa = p.settings.kappa;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(mesh.num_tets()) * 36 + mesh.num_edges());
  for (int t = 0; t < mesh.num_tets(); ++t) {
    const auto& te = mesh.tet_edges[t];
    const auto& c = d.curls(t);
    const double vol = d.volume(t);
    const Mat3 da = p.field_jacobian(t, d.curl(u, t));
    Eigen::Matrix<double, 3, 6> cm;
    for (int k = 0; k < 6; ++k) cm.col(k) = c[k];
    const Eigen::Matrix<double, 6, 6> ke = vol * cm.transpose() * da * cm + kappa * d.mass(t);
    for (int k = 0; k < 6; ++k) {
      const int ek = te[k].index;
      if (constrained[ek]) continue;
      for (int l = 0; l < 6; ++l) {
        const int el = te[l].index;
        if (!constrained[el]) trip.emplace_back(ek, el, ke(k, l));
      }
    }
  }
  for (int e = 0; e < mesh.num_edges(); ++e)
    if (constrained[e]) trip.emplace_back(e, e, 1.0);
  SparseMatrix j(mesh.num_edges(), mesh.num_edges());
  j.setFromTriplets(trip.begin(), trip.end());
  return j;
}

namespace {

// Systems below this size are factorised directly.
constexpr int kDirectLimit = 4000;

}  // namespace

struct SpdSolver::Impl {
  const Discretization* disc = nullptr;
  double kappa = 0.0;
  bool iterative = false;
  SparseMatrix a;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt;
  Eigen::IncompleteCholesky<double, Eigen::Lower, Eigen::AMDOrdering<int>> ic;
  std::shared_ptr<const GradientSpace> gspace;

  bool jacobi = false;
  VecX inv_diag;

  VecX precondition(const VecX& r) const {
    VecX z = jacobi ? VecX(inv_diag.cwiseProduct(r)) : VecX(ic.solve(r));
    if (gspace->grad.cols() > 0) z += gspace->grad * gspace->laplace.solve(gspace->grad.transpose() * r);
    return z;
  }

  // Plain PCG on A x = b down to |r| <= rtol |b| (recurrence residual).
  VecX pcg(const VecX& b, double rtol) const {
    VecX x = VecX::Zero(b.size());
    VecX r = b;
    VecX z = precondition(r);
    VecX p = z;
    double rz = r.dot(z);
    const double target = rtol * b.norm();
    const int max_iter = std::max(2000, static_cast<int>(b.size() / 10));
    for (int it = 0; it < max_iter && r.norm() > target; ++it) {
      const VecX ap = a * p;
      const double alpha = rz / p.dot(ap);
      x += alpha * p;
      r -= alpha * ap;
      z = precondition(r);
      const double rz_new = r.dot(z);
      p = z + (rz_new / rz) * p;
      rz = rz_new;
    }
    return x;
  }
};

SpdSolver::SpdSolver() : impl_(std::make_unique<Impl>()) {}
SpdSolver::SpdSolver(const Discretization& disc, double kappa) : impl_(std::make_unique<Impl>()) {
  impl_->disc = &disc;
  impl_->kappa = kappa;
}
SpdSolver::~SpdSolver() = default;
SpdSolver::SpdSolver(SpdSolver&&) noexcept = default;
SpdSolver& SpdSolver::operator=(SpdSolver&&) noexcept = default;

void SpdSolver::compute(const SparseMatrix& a) {
  Impl& m = *impl_;
  m.a = a;
  m.iterative = m.disc != nullptr && a.rows() == m.disc->num_edges() && a.rows() > kDirectLimit;
  if (m.iterative) {
    m.gspace = m.disc->gradient_space(m.kappa);
    m.ic.compute(m.a);
    // Incomplete Cholesky can break down on strongly graded meshes; the
    // gradient correction still carries the near kernel with a diagonal smoother.
    m.jacobi = m.ic.info() != Eigen::Success;
    if (m.jacobi) {
      if ((m.a.diagonal().array() <= 0.0).any())
        throw Error(Error::Kind::Solver, "matrix has a nonpositive diagonal entry");
      m.inv_diag = m.a.diagonal().cwiseInverse();
    }
    return;
  }
  m.ldlt.compute(m.a);
  if (m.ldlt.info() != Eigen::Success) {
    throw Error(Error::Kind::Solver, "sparse factorisation failed (matrix not SPD?)");
  }
}

VecX SpdSolver::solve(const VecX& b, double tol) const {
  const Impl& m = *impl_;
  const double bn = b.norm();
  if (bn == 0.0) return VecX::Zero(b.size());
  VecX x;
  VecX r;
  if (m.iterative) {
    // Restarted from the true residual; the CG recurrence drifts on these
    // badly scaled systems.
    x = VecX::Zero(b.size());
    r = b;
    for (int outer = 0; outer < 8 && r.norm() > tol * bn; ++outer) {
      x += m.pcg(r, std::max(1e-8, 0.1 * tol * bn / r.norm()));
      r = b - m.a * x;
    }
  } else {
    x = m.ldlt.solve(b);
    r = b - m.a * x;
    // Iterative refinement keeps ill-conditioned systems on target.
    for (int k = 0; k < 5 && r.norm() > tol * bn; ++k) {
      x += m.ldlt.solve(r);
      r = b - m.a * x;
    }
  }
  const double rel = r.norm() / bn;
  if (!std::isfinite(rel) || rel > tol) {
    std::ostringstream os;
    os << "linear solve reached relative residual " << rel << " > " << tol;
    throw Error(Error::Kind::Solver, os.str());
  }
  return x;
}

NewtonResult newton_solve(const Problem& p) {
  return newton_solve(p, VecX::Zero(p.disc->num_edges()));
}

NewtonResult newton_solve(const Problem& p, const VecX& initial) {
  p.settings.validate();
  NewtonResult res;
  res.u = initial;
  const double ref0 = assemble_residual(p, VecX::Zero(initial.size())).norm();
  VecX r = assemble_residual(p, res.u);
  double rn = r.norm();
  const double ref = ref0 > 0.0 ? ref0 : rn;
  if (ref == 0.0) {
    res.log.push_back({0, 0.0, 0.0});
    return res;
  }
  res.log.push_back({0, rn / ref, 0.0});
  SpdSolver solver(*p.disc, p.settings.kappa);
  int it = 0;
  while (rn / ref > p.settings.newton_tol) {
    if (it >= p.settings.max_newton) {
      std::ostringstream os;
      os << "Newton did not converge in " << p.settings.max_newton
         << " iterations (relative residual " << rn / ref << ")";
      throw NonConvergence(os.str(), res.log);
    }
    ++it;
    solver.compute(assemble_jacobian(p, res.u));
    const VecX delta = solver.solve(-r, p.settings.linear_tol);

    double alpha = 1.0;
    VecX trial;
    VecX r_trial;
    double rn_trial = 0.0;
    bool accepted = false;
    for (int h = 0; h <= p.settings.line_search_halvings; ++h) {
      trial = res.u + alpha * delta;
      r_trial = assemble_residual(p, trial);
      rn_trial = r_trial.norm();
      if (rn_trial <= (1.0 - 1e-4 * alpha) * rn) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      if (!(rn_trial < rn)) {
        std::ostringstream os;
        os << "Newton line search stalled at relative residual " << rn / ref;
        throw NonConvergence(os.str(), res.log);
      }
      alpha *= 2.0;
    }
    res.u = std::move(trial);
    r = std::move(r_trial);
    rn = rn_trial;
    res.log.push_back({it, rn / ref, alpha});
  }
  res.iterations = it;
  res.residual = rn / ref;
  return res;
}

Vec3 curl_at(const Discretization& disc, const TetLocator& locator, const VecX& u,
             const Vec3& point) {
  const int t = locator.locate(point);
  if (t < 0) {
    std::ostringstream os;
    os << "point (" << point.transpose() << ") is outside the mesh";
    throw Error(Error::Kind::Location, os.str());
  }
  return disc.curl(u, t);
}

VecX interpolate(const Mesh& mesh, const std::function<Vec3(const Vec3&)>& f) {
  static const double xg[3] = {0.5 - 0.5 * std::sqrt(0.6), 0.5, 0.5 + 0.5 * std::sqrt(0.6)};
  static const double wg[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
  VecX u(mesh.num_edges());
  for (int e = 0; e < mesh.num_edges(); ++e) {
    const Vec3& a = mesh.vertices[mesh.edges[e][0]];
    const Vec3& b = mesh.vertices[mesh.edges[e][1]];
    const Vec3 tangent = b - a;
    double s = 0.0;
    for (int q = 0; q < 3; ++q) s += wg[q] * f(a + xg[q] * tangent).dot(tangent);
    u[e] = s;
  }
  return u;
}

VecX gradient_field(const Mesh& mesh, const VecX& nodal) {
  VecX u(mesh.num_edges());
  for (int e = 0; e < mesh.num_edges(); ++e) u[e] = nodal[mesh.edges[e][1]] - nodal[mesh.edges[e][0]];
  return u;
}

HelmholtzSplit helmholtz_split(const Discretization& disc, const VecX& u, double linear_tol) {
  const Mesh& mesh = disc.mesh();
  const SparseMatrix m = disc.mass_matrix();
  const SparseMatrix g = disc.gradient_matrix();
  const SparseMatrix lap = SparseMatrix(g.transpose() * m * g);
  const VecX rhs = g.transpose() * (m * u);

  const auto fixed = dirichlet_vertices(mesh);
  std::vector<int> index(mesh.num_vertices(), -1);
  int nfree = 0;
  for (int v = 0; v < mesh.num_vertices(); ++v)
    if (!fixed[v]) index[v] = nfree++;

  std::vector<Eigen::Triplet<double>> trip;
  for (int k = 0; k < lap.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(lap, k); it; ++it) {
      const int i = index[it.row()], j = index[it.col()];
      if (i >= 0 && j >= 0) trip.emplace_back(i, j, it.value());
    }
  }
  SparseMatrix a(nfree, nfree);
  a.setFromTriplets(trip.begin(), trip.end());
  VecX b(nfree);
  for (int v = 0; v < mesh.num_vertices(); ++v)
    if (index[v] >= 0) b[index[v]] = rhs[v];

  HelmholtzSplit out;
  out.phi = VecX::Zero(mesh.num_vertices());
  if (nfree > 0) {
    SpdSolver solver;
    try {
      solver.compute(a);
    } catch (const Error&) {
      throw Error(Error::Kind::Solver, "singular Poisson system in Helmholtz split");
    }
    const VecX x = solver.solve(b, linear_tol);
    for (int v = 0; v < mesh.num_vertices(); ++v)
      if (index[v] >= 0) out.phi[v] = x[index[v]];
  }
  out.psi = u - gradient_field(mesh, out.phi);
  return out;
}

double l2_inner(const Discretization& disc, const VecX& a, const VecX& b) {
  double s = 0.0;
  for (int t = 0; t < disc.mesh().num_tets(); ++t) {
    s += disc.gather(a, t).dot(disc.mass(t) * disc.gather(b, t));
  }
  return s;
}

double curl_l2_norm(const Discretization& disc, const VecX& u) {
  double s = 0.0;
  for (int t = 0; t < disc.mesh().num_tets(); ++t) s += disc.volume(t) * disc.curl(u, t).squaredNorm();
  return std::sqrt(s);
}

}  // namespace curltd
