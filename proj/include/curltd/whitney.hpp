#pragma once

// Lowest-order Whitney (Nedelec first kind) element on a tetrahedron.
// Local edge k = (i, j) from kLocalEdges carries the basis
//   phi_k = lambda_i grad(lambda_j) - lambda_j grad(lambda_i),
// whose curl is the constant 2 grad(lambda_i) x grad(lambda_j).

#include "curltd/mesh.hpp"

#include <Eigen/Dense>

#include <array>

namespace curltd {

template <typename Scalar>
struct TetFrame {
  std::array<Vec3T<Scalar>, 4> grad;  // gradients of the barycentric coordinates
  Scalar volume;
};

template <typename Scalar>
TetFrame<Scalar> tet_frame(const std::array<Vec3T<Scalar>, 4>& x) {
  Mat3T<Scalar> jac;
  jac.col(0) = x[1] - x[0];
  jac.col(1) = x[2] - x[0];
  jac.col(2) = x[3] - x[0];
  const Mat3T<Scalar> inv_t = jac.inverse().transpose();
  TetFrame<Scalar> f;
  f.grad[1] = inv_t.col(0);
  f.grad[2] = inv_t.col(1);
  f.grad[3] = inv_t.col(2);
  f.grad[0] = -(f.grad[1] + f.grad[2] + f.grad[3]);
  f.volume = jac.determinant() / Scalar(6);
  return f;
}

template <typename Scalar>
TetFrame<Scalar> tet_frame(const Mesh& mesh, int t) {
  std::array<Vec3T<Scalar>, 4> x;
  for (int a = 0; a < 4; ++a) x[a] = mesh.vertices[mesh.tets[t][a]].template cast<Scalar>();
  return tet_frame<Scalar>(x);
}

/// Curls of the six local basis functions (local orientation).
template <typename Scalar>
std::array<Vec3T<Scalar>, 6> local_curls(const TetFrame<Scalar>& f) {
  std::array<Vec3T<Scalar>, 6> c;
  for (int k = 0; k < 6; ++k) {
    c[k] = Scalar(2) * f.grad[kLocalEdges[k][0]].cross(f.grad[kLocalEdges[k][1]]);
  }
  return c;
}

/// Value of local basis function k at barycentric coordinates `lambda`.
template <typename Scalar>
Vec3T<Scalar> local_basis(const TetFrame<Scalar>& f, int k,
                          const Eigen::Matrix<Scalar, 4, 1>& lambda) {
  const int i = kLocalEdges[k][0];
  const int j = kLocalEdges[k][1];
  return lambda[i] * f.grad[j] - lambda[j] * f.grad[i];
}

/// Exact local mass matrix int phi_k . phi_l, from
/// int lambda_a lambda_b = |T| (1 + delta_ab) / 20.
template <typename Scalar>
Eigen::Matrix<Scalar, 6, 6> local_mass(const TetFrame<Scalar>& f) {
  Eigen::Matrix<Scalar, 4, 4> g;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) g(a, b) = f.grad[a].dot(f.grad[b]);
  auto m2 = [&](int a, int b) { return f.volume * Scalar(a == b ? 2 : 1) / Scalar(20); };
  Eigen::Matrix<Scalar, 6, 6> m;
  for (int k = 0; k < 6; ++k) {
    const int i = kLocalEdges[k][0], j = kLocalEdges[k][1];
    for (int l = 0; l < 6; ++l) {
      const int p = kLocalEdges[l][0], q = kLocalEdges[l][1];
      m(k, l) = m2(i, p) * g(j, q) - m2(i, q) * g(j, p) - m2(j, p) * g(i, q) + m2(j, q) * g(i, p);
    }
  }
  return m;
}

/// Symmetric 4-point degree-2 rule on the reference tet, barycentric
/// coordinates; weights sum to one.
inline const std::array<Eigen::Vector4d, 4>& quadrature_points_deg2() {
  static const std::array<Eigen::Vector4d, 4> pts = [] {
    const double a = 0.5854101966249685;
    const double b = 0.1381966011250105;
    return std::array<Eigen::Vector4d, 4>{Eigen::Vector4d(a, b, b, b), Eigen::Vector4d(b, a, b, b),
                                          Eigen::Vector4d(b, b, a, b), Eigen::Vector4d(b, b, b, a)};
  }();
  return pts;
}

}  // namespace curltd
