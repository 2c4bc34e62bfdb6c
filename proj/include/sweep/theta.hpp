#pragma once

#include "sweep/funnel.hpp"

#include <optional>
#include <string>
#include <vector>

namespace sweep {

// σ_t = l σ_u + m σ_v on the funnel.
struct LM {
  double l = 0.0, m = 0.0;
  double residual = 0.0;  // |σ_t - l σ_u - m σ_v|
};

LM lm_coefficients(const SweptScene& scene, const FunnelPoint& p);

enum class ThetaRoute { CoefficientForm, FrameDeterminant, FallbackFt };
const char* to_string(ThetaRoute r);

struct ThetaSample {
  FunnelPoint point;
  double l = 0.0, m = 0.0;
  double theta = 0.0;
  ThetaRoute route = ThetaRoute::CoefficientForm;
};

ThetaSample theta_sample(const SweptScene& scene, const FunnelPoint& p);
double theta(const SweptScene& scene, const FunnelPoint& p);

struct FrameTheta {
  double theta = 0.0;
  Mat2 D = Mat2::Zero();  // (J α, J β) in the (σ_u, σ_v) basis
};

FrameTheta theta_via_frames(const SweptScene& scene, const FunnelPoint& p);

// <-σ_tt + 2 A' V, N> + κ |V|², with κ the normal curvature along V.
double theta_closed_form(const SweptScene& scene, const FunnelPoint& p);

// Extension of θ off the funnel: l, m by least squares at any (u, v, t).
// Used by the F⁰ tracer and for finite-difference gradients.
double theta_extended(const SweptScene& scene, std::size_t face, double u, double v, double t,
                      bool extrapolate = false);
Vec3 theta_gradient(const SweptScene& scene, std::size_t face, double u, double v, double t, double h = 1e-5);

// Singular values (descending) of J_σ restricted to the funnel tangent plane,
// in an orthonormal basis of that plane.
Vec2 funnel_immersion_singular_values(const SweptScene& scene, const FunnelPoint& p);

struct LambdaValue {
  double lambda = 0.0;
  Vec2 foot = Vec2::Zero();  // (u, v) of the projection π(t)
};

// Signed distance of the inverse trajectory of σ(p) from ∂M(p.t), measured in
// the body frame. `extrapolate` lets the stencil reach past the ends of I.
LambdaValue lambda_at(const SweptScene& scene, const FunnelPoint& p, double t, bool extrapolate = false);
double lambda(const SweptScene& scene, const FunnelPoint& p, double t);

struct ThetaCheck {
  double theta_analytic = 0.0;     // coefficient form
  double theta_frames = 0.0;       // frame-determinant route (NaN when (f_u, f_v) vanishes)
  double theta_closed = 0.0;       // curvature form
  double lambda_second_fd = 0.0;   // central second difference of λ
  double abs_diff = 0.0;           // max pairwise difference against the FD value
  // False when the stencil's projections cross a curvature break of the face
  // (λ is then not twice differentiable and the FD value is meaningless).
  bool smooth_stencil = true;
};

ThetaCheck theta_fd_check(const SweptScene& scene, const FunnelPoint& p, double h = 1e-3);

// ---------------------------------------------------------------------------
// F⁰ and φ

struct ZeroNode {
  FunnelPoint point;
  double theta = 0.0;
  double l = 0.0, m = 0.0;
  Vec3 grad_theta = Vec3::Zero();
  Vec3 tangent = Vec3::Zero();  // unit dΩ/ds in (u, v, t)
  double s = 0.0;               // arclength in (u, v, t)
  double phi = 0.0;
};

struct PhiRoot {
  double s = 0.0;
  Vec3 param = Vec3::Zero();
  double phi_prime = 0.0;
  int sign = 0;
};

struct ThetaZeroCurve {
  std::size_t chart_face = 0;
  std::vector<ZeroNode> nodes;
  bool closed = false;
  std::vector<PhiRoot> roots;
  bool phi_vanishes = false;  // the whole curve maps to one cusp point
  std::vector<std::string> diagnostics;
};

struct ZeroTraceOptions {
  double h_min = 1e-4;
  double h_max = 2e-2;
  double h_init = 5e-3;
  int max_newton = 30;
  std::size_t max_nodes = 100000;
  double grad_step = 1e-5;
};

// Newton onto f = θ = 0 from q (min-norm). Returns nullopt on failure.
std::optional<Vec3> correct_to_theta_zero(const SweptScene& scene, std::size_t face, const Vec3& q,
                                          const ZeroTraceOptions& opt = {});

std::vector<ThetaZeroCurve> trace_theta_zero(const SweptScene& scene, const Funnel& funnel,
                                             const ZeroTraceOptions& opt = {});

// φ(s) = <z̄ × dΩ/ds, ∇f> at an arclength position along the curve.
double phi(const SweptScene& scene, const ThetaZeroCurve& curve, double s);
// Corrected node (with tangent and φ) at arclength s.
ZeroNode zero_curve_node(const SweptScene& scene, const ThetaZeroCurve& curve, double s);
std::vector<PhiRoot> phi_roots(const SweptScene& scene, const ThetaZeroCurve& curve);

// ---------------------------------------------------------------------------
// Classification

enum class Verdict { Decomposable, NonDecomposable, Marginal };
const char* to_string(Verdict v);

// θ on every funnel sample, indexed [slice][curve][node] like the funnel.
using ThetaField = std::vector<std::vector<std::vector<double>>>;

ThetaField theta_field(const SweptScene& scene, const Funnel& funnel, int threads = 1);

struct SweepClassification {
  Verdict verdict = Verdict::Marginal;
  double theta_min = kInf, theta_max = -kInf;
  std::size_t n_minus = 0, n_zero = 0, n_plus = 0;  // F⁻, F⁰, F⁺ sample counts
  ThetaField theta;
  std::optional<double> delta;  // partition width, filled from sep when decomposable
};

SweepClassification classify_sweep(const SweptScene& scene, const Funnel& funnel, double eps = 1e-6,
                                   int threads = 1);

}  // namespace sweep
