#pragma once

#include "sweep/theta.hpp"

#include <array>
#include <string>
#include <vector>

namespace sweep {

// Signed measure of the world point x against the posed solid M(t); negative inside.
double posed_measure(const SweptScene& scene, const Vec3& x, double t);

struct TimeSample {
  double t = 0.0;
  double measure = 0.0;
  Containment status = Containment::Outside;
};

struct TimeSetOptions {
  int samples = 512;         // uniform samples over I (at least 512 are used)
  double refine = 1e-8;      // bisection width for boundary crossings
  double touch_tol = 1e-9;   // a local minimum of the measure at or below this is a hit
  double window = 1e-6;      // |t' - t| below this counts as t itself
};

/// L(p) for one funnel point: times t' != t at which σ(p) lies in M(t').
struct TimeSet {
  double t = 0.0;
  std::vector<TimeSample> samples;
  std::vector<Interval> intervals;  // maximal; an interval abutting t has an endpoint equal to t
  std::vector<double> hits;         // isolated touches

  bool has_interval() const { return !intervals.empty(); }
  // inf |t - t'| over the set, kInf when empty.
  double ell() const;
};

TimeSet time_set(const SweptScene& scene, const FunnelPoint& p, const TimeSetOptions& opt = {});
double ell(const SweptScene& scene, const FunnelPoint& p, const TimeSetOptions& opt = {});

// Per-sample ℓ, indexed like the funnel.
using EllField = std::vector<std::vector<std::vector<double>>>;
EllField ell_field(const SweptScene& scene, const Funnel& funnel, const TimeSetOptions& opt = {}, int threads = 1);
double sep_estimate(const SweptScene& scene, const Funnel& funnel, const TimeSetOptions& opt = {},
                    int threads = 1);

// Sets classification.delta to sep/2, capped at |I|, when the verdict is Decomposable.
void attach_partition_width(const SweptScene& scene, SweepClassification& classification, double sep);

// ---------------------------------------------------------------------------
// Trim curves

// EndCap curves bound lateral trim regions cut off by the posed solid at an end
// of I: σ(p1) lies on ∂M(t_end), and p2 is the cap point rather than a funnel point.
enum class TrimKind { Elementary, Singular, EndCap };
const char* to_string(TrimKind k);

// One solution of σ(p1) = σ(p2), f(p1) = f(p2) = 0.
struct TrimNode {
  FunnelPoint p1, p2;
  Vec3 world = Vec3::Zero();
  double residual = 0.0;  // |σ(p1) - σ(p2)|
  double gap = 0.0;       // |t1 - t2|
  double angle = 0.0;     // angle between the two sheets at the node
  double s = 0.0;         // arclength of the world polyline
};

struct TrimCurve {
  TrimKind kind = TrimKind::Elementary;
  std::size_t chart1 = 0, chart2 = 0;
  std::vector<TrimNode> nodes;
  bool closed = false;
  std::vector<Vec3> singular_points;  // φ roots touched, in funnel parameters
  std::vector<std::string> diagnostics;
  bool transversal = true;
  double max_residual = 0.0;
  double min_gap = kInf;
};

struct TripleHit {
  Vec3 world = Vec3::Zero();
  std::size_t curve_a = 0, curve_b = 0;
};

struct TrimOptions {
  double h_min = 1e-4;
  double h_max = 2e-2;
  double h_init = 5e-3;
  int max_newton = 30;
  double residual = 1e-8;       // acceptance on |σ(p1) - σ(p2)| and |f|
  double min_angle = 1e-3;      // sheets meeting at a smaller angle are not transversal
  std::size_t max_nodes = 20000;
};

struct ElementaryTrimResult {
  double sep = kInf;
  double delta = kInf;               // partition width
  std::vector<Interval> partition;
  std::vector<TrimCurve> curves;
  std::vector<TripleHit> triple_points;
  std::vector<std::string> diagnostics;
};

// Guided intersection of the patches σ(F(I_i)) of a width-δ partition, with δ = sep/2.
// Seeds lying on a `known` curve (singular curves, traced first) are skipped.
ElementaryTrimResult elementary_trim_curves(const SweptScene& scene, const Funnel& funnel,
                                            const SweepClassification& classification,
                                            const std::vector<TrimCurve>& known = {}, const TimeSetOptions& ts = {},
                                            const TrimOptions& opt = {}, int threads = 1);

// Curves started at the φ roots of the F⁰ curves.
std::vector<TrimCurve> singular_trim_curves(const SweptScene& scene, const std::vector<ThetaZeroCurve>& zero_curves,
                                            const TrimOptions& opt = {});

struct ContactFit {
  double tangent_angle = 0.0;  // trim tangent vs F⁰ tangent at the root
  double exponent = 0.0;       // d(s) ~ s^exponent, d the funnel distance to F⁰
  std::size_t points = 0;
};

// Tangency and contact order of a singular curve with F⁰ at singular point `root`.
ContactFit singular_contact(const SweptScene& scene, const TrimCurve& curve, const ThetaZeroCurve& zero,
                            std::size_t root);

// ---------------------------------------------------------------------------
// Excision

using SampleMask = std::vector<std::vector<std::vector<char>>>;

struct TrimmedEnvelope {
  SampleMask excised;  // [slice][curve][node], 1 inside the p-trim set
  std::vector<TrimCurve> trim_curves;
  // Cap trim boundaries f(., ., t0) = 0 and f(., ., t1) = 0: the first and last slices.
  std::size_t left_cap_slice = 0, right_cap_slice = 0;
  std::size_t n_excised = 0, n_retained = 0;
  std::size_t regions = 0;  // connected excised regions on the sample graph
  bool consistent = true;
  std::vector<std::string> diagnostics;
};

struct ExciseOptions {
  TimeSetOptions time_set;
  int threads = 1;
  bool strict = false;  // throw Excision on an unexplained region boundary
};

// Region boundaries must run along a trim curve, along an F⁰ curve on which φ
// vanishes identically, or across a curvature break where θ jumps sign.
TrimmedEnvelope excise(const SweptScene& scene, const Funnel& funnel, const std::vector<TrimCurve>& trim_curves,
                       const std::vector<ThetaZeroCurve>& zero_curves = {}, const ExciseOptions& opt = {});

}  // namespace sweep
