#pragma once

#include "sweep/core.hpp"

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace sweep {

struct SurfaceJet {
  Vec3 S, Su, Sv, Suu, Suv, Svv;
};

struct ParamRect {
  double u0 = -kPi, u1 = kPi;
  double v0 = -kPi / 2, v1 = kPi / 2;
  bool u_periodic = false;
  bool v_periodic = false;

  double u_period() const { return u1 - u0; }
  double v_period() const { return v1 - v0; }
  // Non-periodic coordinates must lie in the closed range; periodic ones are free.
  bool contains(double u, double v, double slack = 0.0) const;
  Vec2 wrap(double u, double v) const;
};

/// A regular parametric surface S(u, v) with first and second partials.
class Surface {
 public:
  virtual ~Surface() = default;
  virtual SurfaceJet jet(double u, double v) const = 0;
  virtual ParamRect domain() const = 0;
  virtual std::string name() const = 0;

  Vec3 eval(double u, double v) const { return jet(u, v).S; }

  // Values of v where the chart is only C^1 (smooth junctions between faces).
  virtual std::vector<double> v_breaks() const { return {}; }
};

using SurfacePtr = std::shared_ptr<const Surface>;

// Minimum |S_u x S_v| for a point to count as regular.
inline constexpr double kRegularityFloor = 1e-8;

/// Normal data at a surface point. W is the shape operator in the (S_u, S_v)
/// basis with the outward-normal convention dN(d) = W d, so a unit sphere
/// gives the identity.
struct Differential {
  Vec3 N;
  Vec3 Nu, Nv;
  Mat2 W;
  Mat2 first_form;
  double area = 0.0;  // |S_u x S_v|
};

Differential differential(const SurfaceJet& j);
Vec3 normal(const Surface& s, double u, double v);
Mat2 shape_operator(const Surface& s, double u, double v);
// Normal curvature along the tangent direction d (coefficients in the S_u, S_v basis).
double normal_curvature(const SurfaceJet& j, const Differential& d, const Vec2& dir);

// ---------------------------------------------------------------------------
// Built-in charts

// Unit-direction chart d(u, v) = R (cos v cos u, cos v sin u, sin v) scaled by
// a radius profile rho(s), s = <d, axis>. A constant profile is a sphere.
struct RadialProfile {
  // returns rho, d rho/ds, d^2 rho/ds^2
  std::function<std::array<double, 3>(double s)> eval;
  std::string name;
};

inline constexpr double kPoleMargin = 1e-6;

class RadialChart final : public Surface {
 public:
  RadialChart(Vec3 center, Mat3 frame, Vec3 axis, RadialProfile profile);
  SurfaceJet jet(double u, double v) const override;
  ParamRect domain() const override;
  std::string name() const override { return profile_.name; }

 private:
  Vec3 center_;
  Mat3 frame_;
  Vec3 axis_;
  RadialProfile profile_;
};

// S = center + diag(axes) frame d(u, v); the frame only moves the chart poles.
class EllipsoidChart final : public Surface {
 public:
  EllipsoidChart(Vec3 center, Vec3 axes, Mat3 frame = Mat3::Identity());
  SurfaceJet jet(double u, double v) const override;
  ParamRect domain() const override;
  std::string name() const override { return "ellipsoid"; }

 private:
  Vec3 center_;
  Vec3 axes_;
  Mat3 frame_;
};

// Capsule boundary as one C^1 chart: u is the angle about z, w the meridian
// arc length. |w| <= half_height is the cylinder, beyond it the hemispheres.
class CapsuleChart final : public Surface {
 public:
  CapsuleChart(double radius, double half_height);
  SurfaceJet jet(double u, double w) const override;
  ParamRect domain() const override;
  std::string name() const override { return "capsule"; }
  std::vector<double> v_breaks() const override { return {-half_height_, half_height_}; }

  double radius() const { return radius_; }
  double half_height() const { return half_height_; }

 private:
  double radius_;
  double half_height_;
};

// S̄(a, b) = S(phi(a, b)) with phi(a, b) = M (a, b) + c + (e0 sin b, e1 sin a).
struct ChartMap {
  Mat2 M = Mat2::Identity();
  Vec2 c = Vec2::Zero();
  Vec2 e = Vec2::Zero();

  Vec2 apply(const Vec2& ab) const;
  Mat2 jacobian(const Vec2& ab) const;
  Vec2 invert(const Vec2& uv, const Vec2& guess) const;
};

class ReparamSurface final : public Surface {
 public:
  ReparamSurface(SurfacePtr base, ChartMap map);
  SurfaceJet jet(double a, double b) const override;
  ParamRect domain() const override;
  std::string name() const override { return "reparam(" + base_->name() + ")"; }
  const ChartMap& map() const { return map_; }

 private:
  SurfacePtr base_;
  ChartMap map_;
};

// Proper rotation taking +z to `axis` (used to place chart poles).
Mat3 pole_frame(const Vec3& axis);

SurfacePtr make_sphere_chart(const Vec3& center, double radius, const Mat3& frame = Mat3::Identity());
// Cassini-oval surface of revolution about x ("dumbbell"); chart poles on +-y.
SurfacePtr make_cassini_chart(double a, double c);

// ---------------------------------------------------------------------------
// Closed-form membership

enum class PrimitiveKind { None, Sphere, Ellipsoid, Capsule, Cassini };

/// Flat parameter block for a closed-form solid. Points are mapped to the
/// body frame by q = frame^T (x - center) before evaluation. The signed measure
/// is negative inside, zero on the boundary, and is an exact distance for the
/// sphere and capsule and a first-order distance F/|grad F| otherwise.
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::None;
  Vec3 center = Vec3::Zero();
  Mat3 frame = Mat3::Identity();
  std::array<double, 4> p{};  // sphere: r; ellipsoid: a,b,c; capsule: r,hh; cassini: a,c

  double signed_measure(const Vec3& x) const;
  // Unit gradient of the implicit form; the outward normal for x on the boundary.
  Vec3 outward_normal(const Vec3& x) const;
  double bounding_radius() const;
};

enum class Containment { Inside, OnBoundary, Outside };
const char* to_string(Containment c);

struct Face {
  std::string name;
  SurfacePtr surface;
  ParamRect domain;
};

// Smooth junction between faces: e(s) = S(u(s), v(s)) on `face`, with the
// parameter-space curve a straight line start + s * direction.
struct EdgeCurve {
  std::string name;
  std::size_t face = 0;
  Vec2 start = Vec2::Zero();
  Vec2 direction = Vec2::UnitX();
  Interval s_range{-kPi, kPi};
  bool periodic = true;

  Vec2 at(double s) const { return start + s * direction; }
};

struct SolidVertex {
  std::string name;
  std::size_t face = 0;
  double u = 0.0, v = 0.0;
};

class Solid {
 public:
  std::string name;
  std::vector<Face> faces;
  std::vector<EdgeCurve> edges;
  std::vector<SolidVertex> vertices;
  Primitive primitive;

  double signed_measure(const Vec3& x) const;
  Containment contains(const Vec3& x, double tol) const;
  bool has_membership() const { return primitive.kind != PrimitiveKind::None; }
  double bounding_radius() const { return primitive.bounding_radius(); }
  Vec3 bounding_center() const { return primitive.center; }
};

namespace solids {
Solid sphere(const Vec3& center, double radius, const Vec3& pole_axis = Vec3::UnitZ());
Solid ellipsoid(const Vec3& center, const Vec3& axes, const Vec3& pole_axis = Vec3::UnitZ());
Solid capsule(double radius, double half_height);
Solid dumbbell(double a, double c);
}  // namespace solids

// ---------------------------------------------------------------------------
// Closest-point projection onto a chart.

struct Projection {
  double u = 0.0, v = 0.0;
  Vec3 point;
  Vec3 normal;
  double signed_distance = 0.0;  // <x - S, N>
  int iterations = 0;
};

// Newton on the stationarity conditions of |S(u,v) - x|^2 from the given seed.
Projection project_to_surface(const Surface& s, const Vec3& x, double u_seed, double v_seed,
                              int max_iter = 50);
// Best seed from an n x n parameter grid.
Vec2 grid_seed(const Surface& s, const Vec3& x, int n = 48);

}  // namespace sweep
