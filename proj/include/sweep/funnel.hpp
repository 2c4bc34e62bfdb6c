#pragma once

#include "sweep/motion.hpp"
#include "sweep/shape.hpp"

#include <optional>
#include <vector>

namespace sweep {

class SweptScene {
 public:
  SweptScene(Solid solid, RigidMotion motion, std::vector<std::size_t> active_faces = {});

  const Solid& solid() const { return solid_; }
  const RigidMotion& motion() const { return motion_; }
  const Interval& interval() const { return motion_.interval(); }
  const Face& face(std::size_t i) const { return solid_.faces.at(i); }
  const std::vector<std::size_t>& active_faces() const { return active_; }

  // Faces sharing one chart are traced together; these are the first active face per chart.
  std::vector<std::size_t> chart_faces() const;
  // Face whose subdomain holds (u, v) among those sharing face `chart_face`'s surface.
  std::size_t face_at(std::size_t chart_face, double u, double v) const;

 private:
  Solid solid_;
  RigidMotion motion_;
  std::vector<std::size_t> active_;
};

/// Everything needed at one (u, v, t): surface and motion jets, the posed
/// partials of σ, and f with its analytic gradient.
struct SweepJet {
  SurfaceJet s;
  Differential d;
  MotionJet m;
  Vec3 sigma, sigma_u, sigma_v, sigma_t;  // sigma_t is the velocity V
  Vec3 N;                                 // A N, unit world normal
  double f = 0.0;
  Vec3 grad = Vec3::Zero();               // (f_u, f_v, f_t)
};

// `extrapolate` evaluates the motion's closed form outside I (for difference stencils at the ends).
SweepJet sweep_jet(const SweptScene& scene, std::size_t face, double u, double v, double t, bool extrapolate = false);

struct FunnelPoint {
  std::size_t face = 0;
  double u = 0.0, v = 0.0, t = 0.0;
  double f = 0.0;
  Vec3 grad = Vec3::Zero();
  Vec3 sigma = Vec3::Zero();
  Vec3 normal = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();

  Vec3 param() const { return {u, v, t}; }
};

FunnelPoint make_funnel_point(const SweptScene& scene, std::size_t face, double u, double v, double t);

inline constexpr double kFunnelTol = 1e-9;
inline constexpr double kGradFloor = 1e-7;

// g(x, t) = <A(t) N(x), A'(t) x + b'(t)> for a point x on the solid boundary.
double g_value(const SweptScene& scene, const Vec3& x, double t, double tol = 1e-9);
double f_value(const SweptScene& scene, std::size_t face, double u, double v, double t);
Vec3 grad_f(const SweptScene& scene, std::size_t face, double u, double v, double t);
double jacobian_det(const SweptScene& scene, std::size_t face, double u, double v, double t);

struct TraceOptions {
  double h_min = 1e-4;
  double h_max = 5e-2;
  double h_init = 1e-2;
  int max_newton = 30;
  // A seed may move at most this far (parameter units) while being corrected.
  double basin = 0.5;
  std::size_t max_nodes = 200000;
};

struct ContactCurve {
  double t = 0.0;
  std::size_t chart_face = 0;
  std::vector<FunnelPoint> points;
  bool closed = false;
  int component = -1;
  int u_winding = 0;  // closed curves: periods of u gained going once around
};

// Min-norm Newton onto f(., ., t) = 0 from (u, v); throws Tracing when it
// fails or leaves the seed's basin.
Vec2 correct_to_slice(const SweptScene& scene, std::size_t face, double u, double v, double t,
                      const TraceOptions& opt = {});

ContactCurve trace_contact_curve(const SweptScene& scene, std::size_t face, double t, const Vec2& seed,
                                 const TraceOptions& opt = {});

// Seeds for a slice: sign changes of f on an n x n grid, refined by bisection.
std::vector<Vec2> slice_seeds(const SweptScene& scene, std::size_t face, double t, int n = 64);

struct ComponentEvent {
  enum class Kind { Birth, Death } kind;
  int component;
  std::size_t slice;
};

struct FunnelSlice {
  double t = 0.0;
  std::vector<ContactCurve> curves;  // resampled, index aligned with neighbours
  std::vector<std::string> errors;
};

struct Funnel {
  std::vector<FunnelSlice> slices;
  int n_components = 0;
  std::size_t n_p = 0;
  std::vector<ComponentEvent> events;

  // Curve of `component` in slice i, or nullptr.
  const ContactCurve* curve(std::size_t slice, int component) const;
  std::size_t point_count() const;
};

struct FunnelOptions {
  TraceOptions trace;
  int seed_grid = 64;
  int threads = 1;
};

Funnel sample_funnel(const SweptScene& scene, int n_t, int n_p, const FunnelOptions& opt = {});

// Resample a traced curve to n nodes equally spaced in parameter-space arc length.
ContactCurve resample_curve(const SweptScene& scene, const ContactCurve& c, std::size_t n,
                            std::optional<Vec2> start_hint = std::nullopt);

enum class EndCap { Left, Right };
bool classify_endcap(const SweptScene& scene, std::size_t face, double u, double v, EndCap which);

// Edge restriction f^e(s, t) = f(u(s), v(s), t).
double edge_f(const SweptScene& scene, const EdgeCurve& edge, double s, double t);
// Zero set of f^e traced in (s, t); each polyline is a list of (s, t) nodes.
std::vector<std::vector<Vec2>> trace_edge_funnel(const SweptScene& scene, const EdgeCurve& edge, int grid = 96);

// Roots of f^z(t) = g(z, t) on I, by sign changes on a grid plus bisection to 1e-10.
std::vector<double> vertex_times(const SweptScene& scene, const SolidVertex& vertex, int grid = 512);

}  // namespace sweep
