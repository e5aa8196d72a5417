#include "curltd/material.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

namespace curltd {

void SaturationLaw::validate() const {
  if (!(q1 > 0.0 && q1 < nu0)) throw Error(Error::Kind::Domain, "saturation law: need 0 < q1 < nu0");
  if (!(q2 > 0.0)) throw Error(Error::Kind::Domain, "saturation law: need q2 > 0");
  if (!(q3 >= 2.0)) throw Error(Error::Kind::Domain, "saturation law: need q3 >= 2");
}

MaterialLaw MaterialLaw::saturation(const SaturationLaw& law) {
  law.validate();
  MaterialLaw m;
  m.kind_ = Kind::Saturation;
  m.law_ = law;
  m.nu_ = law.nu0;
  return m;
}

MaterialLaw MaterialLaw::linear(double nu) {
  MaterialLaw m;
  m.nu_ = nu;
  return m;
}

MaterialLaw MaterialLaw::custom(std::string name, std::function<Vec3(const Vec3&)> a,
                                std::function<Mat3(const Vec3&)> da) {
  MaterialLaw m = linear(0.0);
  m.kind_ = Kind::Custom;
  m.name_ = std::move(name);
  m.custom_a_ = std::move(a);
  m.custom_da_ = std::move(da);
  return m;
}

Vec3 MaterialLaw::eval(const Vec3& y) const {
  switch (kind_) {
    case Kind::Saturation: return saturation_a(law_, y);
    case Kind::Linear: return nu_ * y;
    case Kind::Custom: return custom_a_(y);
  }
  return Vec3::Zero();
}

Mat3 MaterialLaw::jacobian(const Vec3& y) const {
  switch (kind_) {
    case Kind::Saturation: return saturation_da(law_, y);
    case Kind::Linear: return nu_ * Mat3::Identity();
    case Kind::Custom: return custom_da_(y);
  }
  return Mat3::Zero();
}

double MaterialLaw::monotonicity_floor() const {
  switch (kind_) {
    case Kind::Saturation: return law_.q1;
    case Kind::Linear: return nu_;
    case Kind::Custom: return 0.0;
  }
  return 0.0;
}

std::string MaterialLaw::describe() const {
  std::ostringstream os;
  os << std::setprecision(17);
  switch (kind_) {
    case Kind::Saturation:
      os << "saturation(nu0=" << law_.nu0 << ",q1=" << law_.q1 << ",q2=" << law_.q2
         << ",q3=" << law_.q3 << ")";
      break;
    case Kind::Linear: os << "linear(nu=" << nu_ << ")"; break;
    case Kind::Custom: os << "custom(" << name_ << ")"; break;
  }
  return os.str();
}

std::string MaterialPair::describe() const { return "a1=" + a1.describe() + ";a2=" + a2.describe(); }

std::string MaterialPair::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : describe()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

MaterialPair saturation_pair(const SaturationLaw& law) {
  return {MaterialLaw::saturation(law), MaterialLaw::linear(law.nu0)};
}

MaterialPair linear_pair(double nu1, double nu2) {
  return {MaterialLaw::linear(nu1), MaterialLaw::linear(nu2)};
}

namespace {

Vec3 sample_ball(std::mt19937_64& rng, double radius) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (;;) {
    const Vec3 p(u(rng), u(rng), u(rng));
    if (p.squaredNorm() <= 1.0) return radius * p;
  }
}

double spectral_norm(const Mat3& m) {
  // Jacobians of the laws here are symmetric; fall back to SVD otherwise.
  if ((m - m.transpose()).norm() <= 1e-14 * m.norm()) {
    return Eigen::SelfAdjointEigenSolver<Mat3>(m, Eigen::EigenvaluesOnly)
        .eigenvalues()
        .cwiseAbs()
        .maxCoeff();
  }
  return Eigen::JacobiSVD<Mat3>(m).singularValues()[0];
}

}  // namespace

AssumptionReport check_assumptions(const MaterialPair& pair, int samples, double radius,
                                   std::uint64_t seed) {
  if (samples < 1000) throw Error(Error::Kind::Domain, "check_assumptions: need >= 1000 samples");
  std::mt19937_64 rng(seed);
  AssumptionReport report;
  for (int s = 0; s < 2; ++s) {
    const MaterialLaw& law = pair.law(s == 0 ? Side::One : Side::Two);
    AssumptionEstimate est{std::numeric_limits<double>::infinity(), 0.0, 0.0};
    for (int i = 0; i < samples; ++i) {
      const Vec3 x = sample_ball(rng, radius);
      const Vec3 y = sample_ball(rng, radius);
      const Vec3 dx = x - y;
      const double n2 = dx.squaredNorm();
      if (n2 == 0.0) continue;
      const Vec3 da = law.eval(x) - law.eval(y);
      est.c1 = std::min(est.c1, da.dot(dx) / n2);
      est.c2 = std::max(est.c2, da.norm() / std::sqrt(n2));
      const Mat3 jx = law.jacobian(x);
      est.c3 = std::max(est.c3, spectral_norm(jx - law.jacobian(y)) / std::sqrt(n2));
      // Pointwise Jacobian bounds sharpen both constants; difference
      // quotients of far-apart pairs alone underestimate the sup.
      const Mat3 sym = 0.5 * (jx + jx.transpose());
      est.c1 = std::min(est.c1, Eigen::SelfAdjointEigenSolver<Mat3>(sym, Eigen::EigenvaluesOnly)
                                    .eigenvalues()
                                    .minCoeff());
      est.c2 = std::max(est.c2, spectral_norm(jx));
    }
    report.side[s] = est;
  }
  report.c1_est = std::min(report.side[0].c1, report.side[1].c1);
  report.c2_est = std::max(report.side[0].c2, report.side[1].c2);
  report.c3_est = std::max(report.side[0].c3, report.side[1].c3);
  const double floor = std::max(0.0, std::min(pair.a1.monotonicity_floor(),
                                              pair.a2.monotonicity_floor()));
  report.threshold = floor * (1.0 - 1e-6);
  report.pass = report.c1_est > 0.0 && report.c1_est >= report.threshold;
  return report;
}

}  // namespace curltd
