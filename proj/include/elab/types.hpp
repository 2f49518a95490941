#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <string_view>

namespace elab {

// Chart coordinates never exceed three components; fixed capacity keeps
// the hot Monte Carlo loops free of heap traffic.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;
using Point = Vec;
using Vec3 = Eigen::Vector3d;

enum class ErrorCode {
  OutOfWindow,
  ChartViolation,
  LogOfZero,
  QuadratureDivergence,
  BlowUp,
  CensoredDominates,
  InsufficientCurve,
  ConfigError,
  InvalidArgument,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline Point make_point(std::initializer_list<double> coords) {
  Point p(static_cast<Eigen::Index>(coords.size()));
  Eigen::Index i = 0;
  for (double c : coords) p(i++) = c;
  return p;
}

}  // namespace elab
