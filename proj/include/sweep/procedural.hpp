#pragma once

#include "sweep/bspline.hpp"
#include "sweep/funnel.hpp"

#include <string>

namespace sweep {

struct SeedOptions {
  int component = 0;
  int degree = 3;  // in both p and t, lowered when the grid is too small
};

// Seed fitted through one funnel component, in body coordinates: X(p, t) is a
// point near the solid boundary and Ē(p, t) = A(t) X(p, t) + b(t). γ(p, t) =
// (ū, v̄, t) is the projection of X onto the chart, started from the nearest
// funnel sample. Fitting in the body rather than in (u, v) keeps the seed smooth
// when contact curves pass over a chart pole. p in [0, 1] is the sample index
// along each slice over the node count (normalized arclength, since slices are
// resampled evenly); it is periodic on closed components.
struct SeedSurface {
  std::size_t face = 0;
  int component = 0;
  bool closed = false;
  Interval interval;
  TensorSpline<3> spline;             // X over (p, t)
  int n_p = 0, n_t = 0;
  std::vector<Vec2> samples_uv;       // funnel (u, v), [k * n_t + i]
  double max_residual = 0.0, rms_residual = 0.0;  // |γ - sample| in (u, v)
  double max_body_residual = 0.0;                 // |X - S(sample)|

  struct Jet {
    Vec3 X, Xp, Xt, Xpp, Xpt;
  };
  Jet jet(double p, double t) const;
  // γ(p, t) without the t coordinate.
  Vec2 gamma(const Surface& surface, double p, double t) const;

  std::string serialize() const;
  static SeedSurface parse(const std::string& text);
};

SeedSurface build_seed(const SweptScene& scene, const Funnel& funnel, const SeedOptions& opt = {});

struct NewtonSettings {
  int max_iter = 30;
  double step_tol = 1e-12;
  double residual = 1e-10;
  int max_halving = 8;
};

struct EnvelopePoint {
  double u = 0.0, v = 0.0, t = 0.0;
  Vec3 world = Vec3::Zero();
  int iterations = 0;
  double f_residual = 0.0;      // |f(u, v, t)|
  double plane_residual = 0.0;  // |<σ(u, v, t) - Ē(p, t), ∂Ē/∂p>|
};

struct EnvelopeDerivatives {
  Vec3 dp = Vec3::Zero(), dt = Vec3::Zero();
  Vec2 uv_p = Vec2::Zero(), uv_t = Vec2::Zero();
  double condition = 0.0;
};

struct AssumptionCheck {
  int sign_changes = 0;
  bool ok = true;
};

class ProceduralEnvelope {
 public:
  ProceduralEnvelope(const SweptScene& scene, SeedSurface seed, NewtonSettings nr = {});

  const SeedSurface& seed() const { return seed_; }
  const NewtonSettings& settings() const { return nr_; }
  const SweptScene& scene() const { return *scene_; }

  // Ē(p, t) = A(t) X(p, t) + b(t).
  Vec3 approximate(double p, double t) const;
  Vec2 gamma(double p, double t) const;

 private:
  const SweptScene* scene_;
  SeedSurface seed_;
  NewtonSettings nr_;
};

// Solves f = 0 and the normal-plane condition for (u, v), starting from γ(p, t)
// or from an explicit start. Throws Evaluation with the last iterate on failure.
EnvelopePoint eval_envelope(const ProceduralEnvelope& env, double p, double t);
EnvelopePoint eval_envelope(const ProceduralEnvelope& env, double p, double t, const Vec2& start);

// ∂E/∂p and ∂E/∂t by implicit differentiation. Throws Derivative when the 2x2
// system is ill conditioned or when E fails to be an immersion (θ = 0).
EnvelopeDerivatives eval_derivatives(const ProceduralEnvelope& env, double p, double t);

// Sign changes of q -> <Ē(q, t) - Ē(p, t), ∂Ē/∂p(p, t)> over q in p ± 0.2.
// More than one means the normal plane may cut the iso-t curve twice.
AssumptionCheck check_single_root(const ProceduralEnvelope& env, double p, double t, int samples = 41);

}  // namespace sweep
