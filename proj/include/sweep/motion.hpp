#pragma once

#include "sweep/core.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace sweep {

// Rigid pose x -> A x + b.
struct Pose {
  Mat3 A = Mat3::Identity();
  Vec3 b = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return A * x + b; }
  Vec3 apply_inverse(const Vec3& y) const { return A.transpose() * (y - b); }
};

// Pose together with its first and second time derivatives.
struct MotionJet {
  Mat3 A = Mat3::Identity();
  Mat3 dA = Mat3::Zero();
  Mat3 ddA = Mat3::Zero();
  Vec3 b = Vec3::Zero();
  Vec3 db = Vec3::Zero();
  Vec3 ddb = Vec3::Zero();

  Pose pose() const { return {A, b}; }
};

/// A C^2 trajectory h(t) = (A(t), b(t)) over a closed interval.
///
/// Every family is closed form, so the jet function is also defined slightly
/// outside the interval; `jet_unchecked` exposes that extension for finite
/// difference stencils that straddle an endpoint. All other queries reject
/// times outside the interval with ErrorKind::Domain.
class RigidMotion {
 public:
  using JetFn = std::function<MotionJet(double)>;

  RigidMotion(Interval interval, JetFn jet, std::string description);

  const Interval& interval() const { return interval_; }
  const std::string& description() const { return description_; }

  Pose evaluate(double t) const;
  MotionJet jet(double t) const;
  MotionJet jet_unchecked(double t) const { return jet_(t); }

  Vec3 apply(const Vec3& x, double t) const { return evaluate(t).apply(x); }
  // v_x(t) = A'(t) x + b'(t)
  Vec3 velocity(const Vec3& x, double t) const;
  // A^T(t) (x - b(t))
  Vec3 inverse_trajectory_point(const Vec3& x, double t) const;

  // h̄(t) = (A^T(t), -A^T(t) b(t)), with product-rule derivatives.
  RigidMotion inverse() const;
  // h(t) ∘ h(t0)^{-1}; the result is the identity pose at t0.
  RigidMotion rebased(double t0) const;
  RigidMotion with_interval(Interval interval) const;

 private:
  void check_time(double t) const;

  Interval interval_;
  JetFn jet_;
  std::string description_;
};

// Pointwise product (outer ∘ inner)(t): x -> A1 (A2 x + b2) + b1. Uses the
// outer motion's interval.
RigidMotion compose(const RigidMotion& outer, const RigidMotion& inner);

// Rotation by `angle` about the unit axis (Rodrigues).
Mat3 axis_rotation(const Vec3& axis, double angle);

namespace motions {

RigidMotion identity(Interval interval);
RigidMotion constant(Interval interval, const Mat3& A, const Vec3& b);
RigidMotion translation_line(Interval interval, const Vec3& origin, const Vec3& velocity);
// b(t) = center + radius (cos(rate t + phase), sin(rate t + phase), 0)
RigidMotion translation_circle(Interval interval, const Vec3& center, double radius, double rate,
                               double phase = 0.0);
// b(t) = origin + speed t * dir + bend t^2 * normal
RigidMotion translation_parabola(Interval interval, const Vec3& origin, const Vec3& dir,
                                 const Vec3& normal, double speed, double bend);
// Pure translation along a helix about z: (r cos(w t), r sin(w t), rise t).
RigidMotion helix(Interval interval, double radius, double rate, double rise);
// Rotation about an axis through the origin at `rate` plus advance pitch*t along it.
RigidMotion screw(Interval interval, const Vec3& axis, double rate, double pitch);
RigidMotion rotation(Interval interval, const Vec3& axis, double rate, double phase = 0.0);

}  // namespace motions

enum class MotionKind {
  TranslationLine,
  TranslationCircle,
  TranslationParabola,
  Helix,
  Screw,
  ComposedRotation,
};

const char* to_string(MotionKind kind);
MotionKind motion_kind_from_string(const std::string& name);

/// Named-parameter description of a motion family, as read from scene files.
///
/// Missing parameters take the documented defaults; `resolved()` returns the
/// full parameter set so configs can be echoed with every default explicit.
/// A composed-rotation family multiplies a base translation family (given by
/// `base`) with a rotation about `rot_axis` at `rot_rate`.
struct MotionFamily {
  MotionKind kind = MotionKind::TranslationLine;
  Interval interval{0.0, 1.0};
  std::map<std::string, std::vector<double>> params;
  MotionKind base = MotionKind::TranslationLine;

  std::map<std::string, std::vector<double>> resolved() const;
  RigidMotion build() const;
};

}  // namespace sweep
