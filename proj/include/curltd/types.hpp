#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SparseCore>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace curltd {

template <typename Scalar>
using Vec3T = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Mat3T = Eigen::Matrix<Scalar, 3, 3>;

using Vec3 = Vec3T<double>;
using Mat3 = Mat3T<double>;
using VecX = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Base class for all errors raised by the library. `kind()` names the
/// category so the CLI can map it to an exit code.
class Error : public std::runtime_error {
 public:
  enum class Kind {
    Orientation,
    Spec,
    Lookup,
    Domain,
    Configuration,
    Location,
    Solver,
    NonConvergence,
    OutOfRange,
    Resolution,
    Resource,
    Io,
    PartialTable,
  };

  Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

const char* to_string(Error::Kind kind);

}  // namespace curltd
