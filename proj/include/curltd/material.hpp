#pragma once

#include "curltd/types.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>

namespace curltd {

inline constexpr double kNu0 = 1e7 / (4.0 * std::numbers::pi);

/// Analytic reluctivity curve nu(s) = nu0 - (nu0 - q1) exp(-q2 s^q3).
struct SaturationLaw {
  double nu0 = kNu0;
  double q1 = 200.0;
  double q2 = 0.001;
  double q3 = 6.0;

  /// Throws Error::Domain unless 0 < q1 < nu0, q2 > 0, q3 >= 2.
  void validate() const;
};

template <typename Scalar>
Scalar nu_hat(const SaturationLaw& law, Scalar s) {
  using std::exp;
  using std::pow;
  if (s < Scalar(0)) throw Error(Error::Kind::Domain, "nu_hat: negative field magnitude");
  const Scalar nu0(law.nu0);
  return nu0 - (nu0 - Scalar(law.q1)) * exp(-Scalar(law.q2) * pow(s, Scalar(law.q3)));
}

/// nu_hat'(s) / s, finite at s = 0 because q3 >= 2.
template <typename Scalar>
Scalar nu_hat_prime_over_s(const SaturationLaw& law, Scalar s) {
  using std::exp;
  using std::pow;
  const Scalar q3(law.q3);
  const Scalar e = exp(-Scalar(law.q2) * pow(s, q3));
  return (Scalar(law.nu0) - Scalar(law.q1)) * Scalar(law.q2) * q3 * pow(s, q3 - Scalar(2)) * e;
}

template <typename Scalar>
Scalar nu_hat_prime(const SaturationLaw& law, Scalar s) {
  return s * nu_hat_prime_over_s(law, s);
}

/// y -> nu_hat(|y|) y
template <typename Scalar>
Vec3T<Scalar> saturation_a(const SaturationLaw& law, const Vec3T<Scalar>& y) {
  return nu_hat(law, y.norm()) * y;
}

/// nu_hat(|y|) I + nu_hat'(|y|)/|y| y y^T, with the limit nu_hat(0) I near 0.
template <typename Scalar>
Mat3T<Scalar> saturation_da(const SaturationLaw& law, const Vec3T<Scalar>& y) {
  const Scalar s = y.norm();
  Mat3T<Scalar> j = nu_hat(law, s) * Mat3T<Scalar>::Identity();
  if (s < Scalar(1e-12)) return j;
  j += nu_hat_prime_over_s(law, s) * (y * y.transpose());
  return j;
}

/// One isotropic constitutive map a: R^3 -> R^3 with Jacobian.
class MaterialLaw {
 public:
  enum class Kind { Saturation, Linear, Custom };

  MaterialLaw() = default;

  static MaterialLaw saturation(const SaturationLaw& law);
  static MaterialLaw linear(double nu);
  /// Arbitrary map, used for synthetic checks (e.g. a non-monotone law).
  static MaterialLaw custom(std::string name, std::function<Vec3(const Vec3&)> a,
                            std::function<Mat3(const Vec3&)> da);

  Kind kind() const { return kind_; }
  bool is_linear() const { return kind_ == Kind::Linear; }
  const SaturationLaw& saturation_law() const { return law_; }
  double nu() const { return nu_; }

  Vec3 eval(const Vec3& y) const;
  Mat3 jacobian(const Vec3& y) const;

  /// Infimum of the monotonicity constant implied by the parameters
  /// (q1 for the saturation curve, nu for a linear law, 0 if unknown).
  double monotonicity_floor() const;

  std::string describe() const;

 private:
  Kind kind_ = Kind::Linear;
  SaturationLaw law_{};
  double nu_ = kNu0;
  std::string name_;
  std::function<Vec3(const Vec3&)> custom_a_;
  std::function<Mat3(const Vec3&)> custom_da_;
};

enum class Side { One, Two };

/// a1 (ferromagnetic, possibly saturating) and a2 (linear air).
struct MaterialPair {
  MaterialLaw a1 = MaterialLaw::saturation(SaturationLaw{});
  MaterialLaw a2 = MaterialLaw::linear(kNu0);

  const MaterialLaw& law(Side side) const { return side == Side::One ? a1 : a2; }
  bool is_linear() const { return a1.is_linear() && a2.is_linear(); }
  std::string describe() const;
  /// Short content hash of the material parameters.
  std::string hash() const;
};

MaterialPair saturation_pair(const SaturationLaw& law = {});
MaterialPair linear_pair(double nu1, double nu2);

inline Vec3 eval_a(const MaterialPair& pair, Side side, const Vec3& y) {
  return pair.law(side).eval(y);
}
inline Mat3 eval_da(const MaterialPair& pair, Side side, const Vec3& y) {
  return pair.law(side).jacobian(y);
}

struct AssumptionEstimate {
  double c1 = 0.0;  // inf (a(x)-a(y)).(x-y)/|x-y|^2
  double c2 = 0.0;  // sup |a(x)-a(y)|/|x-y|
  double c3 = 0.0;  // sup |da(x)-da(y)|/|x-y|
};

struct AssumptionReport {
  AssumptionEstimate side[2];
  double c1_est = 0.0;
  double c2_est = 0.0;
  double c3_est = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

/// Monte-Carlo estimates of the monotonicity / Lipschitz constants over
/// `samples` random pairs drawn uniformly from the ball of `radius`, combined
/// with the eigenvalues / norm of the Jacobian at the sampled points.
/// Passes iff c1 > 0 and c1 >= min(monotonicity floors) * (1 - 1e-6).
AssumptionReport check_assumptions(const MaterialPair& pair, int samples, double radius,
                                   std::uint64_t seed);

}  // namespace curltd
