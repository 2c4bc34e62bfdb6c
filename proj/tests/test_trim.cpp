#include "sweep/scene.hpp"
#include "sweep/trim.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace sweep;

namespace {

SweptScene translate_scene() {
  return SweptScene(solids::sphere(Vec3::Zero(), 1.0, Vec3::UnitX()),
                    motions::translation_line({0, 1}, Vec3::Zero(), Vec3(1, 0, 0)));
}

SweptScene circle_scene() {
  return SweptScene(solids::sphere(Vec3::Zero(), 1.0), motions::translation_circle({0, 1}, Vec3::Zero(), 0.5, 2.0));
}

double wrap(double a) { return std::remainder(a, 2 * kPi); }

struct Traced {
  SweptScene scene;
  Funnel funnel;
  SweepClassification cls;
  std::vector<ThetaZeroCurve> zero;
  std::vector<TrimCurve> singular;
  ElementaryTrimResult elementary;
};

Traced trace_scene(const std::string& name) {
  Traced r{golden_scene(name).build(), {}, {}, {}, {}, {}};
  r.funnel = sample_funnel(r.scene, 16, 32);
  r.cls = classify_sweep(r.scene, r.funnel);
  r.zero = trace_theta_zero(r.scene, r.funnel);
  r.singular = singular_trim_curves(r.scene, r.zero);
  r.elementary = elementary_trim_curves(r.scene, r.funnel, r.cls, r.singular);
  return r;
}

std::vector<TrimCurve> all_curves(const Traced& r) {
  std::vector<TrimCurve> out = r.singular;
  out.insert(out.end(), r.elementary.curves.begin(), r.elementary.curves.end());
  return out;
}

// Capsule membership straight from the pose, on a dense t' grid without refinement.
bool brute_force_in_trim(const SweptScene& sc, const Vec3& x, double t, double r, double hh) {
  const Interval I = sc.interval();
  const int n = 6000;
  for (int k = 0; k <= n; ++k) {
    const double tp = I.lo + I.length() * k / n;
    if (std::abs(tp - t) < 1e-3) continue;
    const Vec3 y = sc.motion().evaluate(tp).apply_inverse(x);
    const double z = std::clamp(y.z(), -hh, hh);
    if ((y - Vec3(0, 0, z)).norm() - r < -1e-9) return true;
  }
  return false;
}

}  // namespace

TEST(TimeSet, SimpleSweepHasOnlyT) {
  const SweptScene sc = translate_scene();
  for (double t : {0.0, 0.3, 0.77, 1.0}) {
    const FunnelPoint p = make_funnel_point(sc, 0, 0.4, 0.0, t);
    ASSERT_NEAR(p.f, 0.0, 1e-12);
    const TimeSet ts = time_set(sc, p);
    EXPECT_TRUE(ts.intervals.empty());
    EXPECT_TRUE(ts.hits.empty());
    EXPECT_EQ(ts.ell(), kInf);
    EXPECT_GE(ts.samples.size(), 512u);
  }
}

TEST(TimeSet, NegativeThetaGivesIntervalAtT) {
  const SweptScene sc = circle_scene();
  // Component (i), u = 2t - π, has θ = 1 - 2cos v < 0 for |v| < π/3.
  for (double v : {0.0, 0.5, -0.9}) {
    const FunnelPoint p = make_funnel_point(sc, 0, 2 * 0.4 - kPi, v, 0.4);
    const TimeSet ts = time_set(sc, p);
    ASSERT_FALSE(ts.intervals.empty());
    bool abuts = false;
    for (const auto& iv : ts.intervals) abuts = abuts || iv.lo == p.t || iv.hi == p.t;
    EXPECT_TRUE(abuts);
    EXPECT_LE(ell(sc, p), 1e-8);
  }
  // Outside the band nothing returns.
  const FunnelPoint q = make_funnel_point(sc, 0, 2 * 0.4 - kPi, 1.3, 0.4);
  EXPECT_GT(ell(sc, q), 1e-3);
}

TEST(TimeSet, EllDoesNotGrowWithSamples) {
  const Traced r = trace_scene("capsule_helix");
  std::mt19937 g(3);
  const auto& slices = r.funnel.slices;
  for (int k = 0; k < 12; ++k) {
    const auto& s = slices[g() % slices.size()];
    if (s.curves.empty()) continue;
    const auto& c = s.curves[g() % s.curves.size()];
    const FunnelPoint& p = c.points[g() % c.points.size()];
    TimeSetOptions coarse, fine;
    coarse.samples = 512;
    fine.samples = 2048;
    EXPECT_LE(ell(r.scene, p, fine), ell(r.scene, p, coarse) + 1e-8);
  }
}

TEST(TimeSet, SolidWithoutMembershipIsRejected) {
  SceneConfig cfg = golden_scene("sphere_translate");
  Solid s = cfg.solid.build();
  s.primitive = {};
  s.name = "stripped";
  const SweptScene sc(s, cfg.motion.build());
  ASSERT_FALSE(sc.solid().has_membership());
  try {
    posed_measure(sc, Vec3::Zero(), 0.5);
    FAIL();
  } catch (const SweepError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Domain);
  }
}

TEST(Sep, GoldenScenes) {
  {
    const SweptScene sc = translate_scene();
    EXPECT_EQ(sep_estimate(sc, sample_funnel(sc, 8, 16)), kInf);
  }
  {
    const SweptScene sc = circle_scene();
    EXPECT_LE(sep_estimate(sc, sample_funnel(sc, 8, 16)), 1e-8);
  }
  const SweptScene sc = golden_scene("capsule_helix").build();
  const double sep = sep_estimate(sc, sample_funnel(sc, 16, 32));
  const double len = sc.interval().length();
  EXPECT_GT(sep, 0.25 * len);
  EXPECT_LT(sep, len);
}

TEST(Sep, AgreesWithVerdict) {
  for (const auto& name : golden_scene_names()) {
    const SweptScene sc = golden_scene(name).build();
    const Funnel F = sample_funnel(sc, 16, 32);
    SweepClassification cls = classify_sweep(sc, F);
    const double sep = sep_estimate(sc, F);
    EXPECT_EQ(cls.verdict == Verdict::Decomposable, sep > 1e-8) << name;
    attach_partition_width(sc, cls, sep);
    EXPECT_EQ(cls.delta.has_value(), cls.verdict == Verdict::Decomposable) << name;
    if (cls.delta) EXPECT_LE(*cls.delta, sc.interval().length());
  }
}

TEST(ElementaryTrim, SimpleSweepIsEmpty) {
  const Traced r = trace_scene("sphere_translate");
  EXPECT_TRUE(r.elementary.curves.empty());
  EXPECT_EQ(r.elementary.partition.size(), 1u);
}

TEST(ElementaryTrim, CapsuleHelixAudit) {
  const Traced r = trace_scene("capsule_helix");
  const auto& el = r.elementary;
  ASSERT_FALSE(el.curves.empty());
  EXPECT_NEAR(el.delta, 0.5 * el.sep, 1e-15);
  ASSERT_GE(el.partition.size(), 2u);
  for (const auto& iv : el.partition) EXPECT_LE(iv.length(), el.delta + 1e-12);

  std::size_t lateral = 0;
  for (const auto& c : el.curves) {
    EXPECT_LE(c.max_residual, 1e-8);
    for (const auto& n : c.nodes) EXPECT_LE((n.p1.sigma - n.p2.sigma).norm(), 1e-8);
    if (c.kind != TrimKind::Elementary) continue;
    ++lateral;
    EXPECT_GE(c.min_gap, el.delta);
    // Sampled ℓ along the curve stays above δ/2, and the partner time shows up as a touch.
    for (std::size_t k = 0; k < c.nodes.size(); k += 40) {
      const TrimNode& n = c.nodes[k];
      const TimeSet ts = time_set(r.scene, n.p1);
      EXPECT_GE(ts.ell(), 0.5 * el.delta);
      double nearest = kInf;
      for (double h : ts.hits) nearest = std::min(nearest, std::abs(h - n.p2.t));
      for (const auto& iv : ts.intervals)
        nearest = std::min(nearest, std::min(std::abs(iv.lo - n.p2.t), std::abs(iv.hi - n.p2.t)));
      EXPECT_LT(nearest, 1e-5);
    }
  }
  EXPECT_GE(lateral, 1u);
}

TEST(ElementaryTrim, ThreadCountDoesNotChangeResult) {
  const SweptScene sc = golden_scene("capsule_helix").build();
  const Funnel F = sample_funnel(sc, 16, 32);
  const auto cls = classify_sweep(sc, F);
  const auto a = elementary_trim_curves(sc, F, cls, {}, {}, {}, 1);
  const auto b = elementary_trim_curves(sc, F, cls, {}, {}, {}, 3);
  EXPECT_EQ(a.sep, b.sep);
  ASSERT_EQ(a.curves.size(), b.curves.size());
  for (std::size_t i = 0; i < a.curves.size(); ++i) EXPECT_EQ(a.curves[i].nodes.size(), b.curves[i].nodes.size());
}

TEST(SingularTrim, SphereParabolaContact) {
  const Traced r = trace_scene("sphere_parabola");
  ASSERT_FALSE(r.singular.empty());
  std::size_t checked = 0;
  for (const auto& c : r.singular) {
    EXPECT_EQ(c.kind, TrimKind::Singular);
    EXPECT_LE(c.max_residual, 1e-8);
    EXPECT_LE(c.min_gap, 1e-8);
    for (std::size_t k = 0; k < c.singular_points.size(); ++k) {
      for (const auto& z : r.zero) {
        ContactFit fit;
        try {
          fit = singular_contact(r.scene, c, z, k);
        } catch (const SweepError&) {
          continue;
        }
        ++checked;
        EXPECT_LE(fit.tangent_angle, 1e-3);
        EXPECT_NEAR(fit.exponent, 2.0, 0.2);
        EXPECT_GE(fit.points, 6u);
      }
    }
  }
  EXPECT_GE(checked, 1u);
  for (const auto& z : r.zero)
    for (const auto& root : z.roots) EXPECT_GE(std::abs(root.phi_prime), 1e-6);
}

TEST(SingularTrim, EllipsoidArcSameStructure) {
  const Traced r = trace_scene("ellipsoid_arc");
  ASSERT_FALSE(r.singular.empty());
  for (const auto& c : r.singular) {
    EXPECT_FALSE(c.singular_points.empty());
    for (std::size_t k = 0; k < c.singular_points.size(); ++k)
      for (const auto& z : r.zero) {
        try {
          EXPECT_LE(singular_contact(r.scene, c, z, k).tangent_angle, 1e-3);
        } catch (const SweepError&) {
        }
      }
  }
}

TEST(SingularTrim, SingularCurvesTracedFirstBlockNothing) {
  // Elementary tracing after the singular pass finds no re-tracing of the singular curve.
  const Traced r = trace_scene("sphere_parabola");
  for (const auto& c : r.elementary.curves) {
    EXPECT_NE(c.kind, TrimKind::Singular);
    if (c.kind == TrimKind::Elementary) EXPECT_GE(c.min_gap, 0.5 * r.elementary.delta);
  }
}

TEST(Excise, SimpleSweepKeepsEverything) {
  const Traced r = trace_scene("sphere_translate");
  const TrimmedEnvelope env = excise(r.scene, r.funnel, all_curves(r), r.zero);
  EXPECT_EQ(env.n_excised, 0u);
  EXPECT_TRUE(env.consistent);
  EXPECT_EQ(env.right_cap_slice, r.funnel.slices.size() - 1);
}

TEST(Excise, CircleSceneBand) {
  const SweptScene sc = circle_scene();
  const Funnel F = sample_funnel(sc, 12, 48);
  const auto zero = trace_theta_zero(sc, F);
  const TrimmedEnvelope env = excise(sc, F, {}, zero);
  EXPECT_TRUE(env.consistent);
  std::size_t checked = 0;
  for (std::size_t i = 0; i < F.slices.size(); ++i)
    for (std::size_t j = 0; j < F.slices[i].curves.size(); ++j) {
      const auto& pts = F.slices[i].curves[j].points;
      for (std::size_t k = 0; k < pts.size(); ++k) {
        const FunnelPoint& p = pts[k];
        const bool comp_i = std::abs(wrap(p.u - (2 * p.t - kPi))) < 1e-6;
        const bool band = std::abs(p.v) < kPi / 3;
        if (std::abs(std::abs(p.v) - kPi / 3) < 0.05) continue;
        EXPECT_EQ(env.excised[i][j][k] != 0, comp_i && band) << "u " << p.u << " v " << p.v << " t " << p.t;
        ++checked;
      }
    }
  EXPECT_GT(checked, 400u);
}

TEST(Excise, CapsuleHelixMatchesBruteForce) {
  const Traced r = trace_scene("capsule_helix");
  const TrimmedEnvelope env = excise(r.scene, r.funnel, all_curves(r), r.zero);
  EXPECT_TRUE(env.consistent);
  EXPECT_GE(env.regions, 1u);
  std::size_t total = 0, oracle = 0;
  for (std::size_t i = 0; i < r.funnel.slices.size(); ++i)
    for (const auto& c : r.funnel.slices[i].curves)
      for (const auto& p : c.points) {
        ++total;
        oracle += brute_force_in_trim(r.scene, p.sigma, p.t, 0.5, 1.0);
      }
  const double got = double(env.n_excised) / double(env.n_excised + env.n_retained);
  EXPECT_NEAR(got, double(oracle) / double(total), 0.02);
  EXPECT_GT(env.n_excised, 0u);
}

TEST(Excise, MissingTrimCurvesAreReported) {
  const Traced r = trace_scene("capsule_helix");
  const TrimmedEnvelope env = excise(r.scene, r.funnel, {}, r.zero);
  EXPECT_FALSE(env.consistent);
  EXPECT_FALSE(env.diagnostics.empty());
  ExciseOptions strict;
  strict.strict = true;
  try {
    excise(r.scene, r.funnel, {}, r.zero, strict);
    FAIL();
  } catch (const SweepError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Excision);
  }
}
