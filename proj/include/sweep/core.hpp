#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace sweep {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class ErrorKind {
  Domain,
  Regularity,
  Tracing,
  DegenerateSlice,
  NotOnFunnel,
  Projection,
  NonGeneric,
  SingularSeed,
  Evaluation,
  Derivative,
  SeedBuild,
  Excision,
  Resource,
  Config,
};

const char* to_string(ErrorKind kind);

// All numerical stages report failures through this one exception type; the
// kind lets the CLI map failures onto exit codes and lets tests assert on it.
class SweepError : public std::runtime_error {
 public:
  SweepError(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct Interval {
  double lo = 0.0;
  double hi = 1.0;

  double length() const { return hi - lo; }
  bool contains(double t, double slack = 0.0) const { return t >= lo - slack && t <= hi + slack; }
  double clamp(double t) const { return t < lo ? lo : (t > hi ? hi : t); }
};

// Skew-symmetric matrix with hat(w) * x == w.cross(x).
inline Mat3 hat(const Vec3& w) {
  Mat3 k;
  k << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  return k;
}

inline double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a < 0) a += 2.0 * kPi;
  return a - kPi;
}

}  // namespace sweep
