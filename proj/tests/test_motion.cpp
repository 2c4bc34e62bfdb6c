#include "sweep/motion.hpp"

#include <gtest/gtest.h>

#include <Eigen/Geometry>
#include <random>

using namespace sweep;

namespace {

std::vector<MotionFamily> all_families() {
  std::vector<MotionFamily> out;
  for (MotionKind k : {MotionKind::TranslationLine, MotionKind::TranslationCircle,
                       MotionKind::TranslationParabola, MotionKind::Helix, MotionKind::Screw}) {
    MotionFamily f;
    f.kind = k;
    f.interval = {-0.7, 1.3};
    out.push_back(f);
  }
  MotionFamily c;
  c.kind = MotionKind::ComposedRotation;
  c.base = MotionKind::Helix;
  c.interval = {-0.7, 1.3};
  c.params["rot_rate"] = {1.1};
  c.params["offset"] = {0.2, -0.4, 0.9};
  out.push_back(c);
  return out;
}

double rand_in(std::mt19937& g, double a, double b) { return std::uniform_real_distribution<double>(a, b)(g); }

}  // namespace

TEST(Motion, CircleExample) {
  auto m = motions::translation_circle({0, 1}, Vec3::Zero(), 0.5, 2.0, 0.0);
  const Pose p = m.evaluate(0.0);
  EXPECT_NEAR((p.A - Mat3::Identity()).norm(), 0.0, 1e-15);
  EXPECT_NEAR((p.b - Vec3(0.5, 0, 0)).norm(), 0.0, 1e-15);
  EXPECT_NEAR((m.velocity(Vec3(3, -2, 1), 0.0) - Vec3(0, 1, 0)).norm(), 0.0, 1e-15);
}

TEST(Motion, ZeroOffsetsAtReferenceTime) {
  for (MotionKind k : {MotionKind::Screw}) {
    MotionFamily f;
    f.kind = k;
    const Pose p = f.build().evaluate(0.0);
    EXPECT_NEAR((p.A - Mat3::Identity()).norm(), 0.0, 1e-15);
    EXPECT_NEAR(p.b.norm(), 0.0, 1e-15);
  }
  const Pose q = motions::translation_line({0, 1}, Vec3::Zero(), Vec3::UnitX()).evaluate(0.0);
  EXPECT_NEAR(q.b.norm(), 0.0, 0.0);
}

TEST(Motion, ScrewAgainstQuaternion) {
  auto m = motions::screw({0, 1}, Vec3::UnitZ(), kPi, 1.0);
  const Pose p = m.evaluate(0.5);
  const Mat3 oracle = Eigen::Quaterniond(Eigen::AngleAxisd(kPi / 2, Vec3::UnitZ())).toRotationMatrix();
  EXPECT_LT((p.A - oracle).norm(), 1e-14);
  EXPECT_LT((p.b - Vec3(0, 0, 0.5)).norm(), 1e-14);
}

TEST(Motion, VelocityExamples) {
  auto line = motions::translation_line({0, 1}, Vec3::Zero(), Vec3::UnitX());
  EXPECT_LT((line.velocity(Vec3(0.3, 4, -1), 0.6) - Vec3::UnitX()).norm(), 1e-15);
  auto spin = motions::rotation({-1, 1}, Vec3::UnitZ(), 1.0);
  EXPECT_LT((spin.velocity(Vec3::UnitX(), 0.0) - Vec3::UnitY()).norm(), 1e-15);
}

TEST(Motion, DomainErrors) {
  auto m = motions::translation_line({0, 1}, Vec3::Zero(), Vec3::UnitX());
  EXPECT_THROW(m.evaluate(1.5), SweepError);
  EXPECT_THROW(m.velocity(Vec3::Zero(), -0.1), SweepError);
  EXPECT_THROW(m.inverse_trajectory_point(Vec3::Zero(), 2.0), SweepError);
  try {
    m.evaluate(-1);
  } catch (const SweepError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Domain);
  }
  EXPECT_THROW(motions::identity({1, 1}), SweepError);
}

TEST(Motion, InverseExamples) {
  auto line = motions::translation_line({0, 1}, Vec3::Zero(), Vec3::UnitX());
  const Pose p = line.inverse().evaluate(0.4);
  EXPECT_LT((p.b - Vec3(-0.4, 0, 0)).norm(), 1e-15);
  EXPECT_LT((p.A - Mat3::Identity()).norm(), 1e-15);

  auto spin = motions::rotation({0, 2}, Vec3::UnitZ(), 1.0);
  const Mat3 expect = Eigen::AngleAxisd(-0.7, Vec3::UnitZ()).toRotationMatrix();
  EXPECT_LT((spin.inverse().evaluate(0.7).A - expect).norm(), 1e-14);

  auto circle = motions::translation_circle({0, 1}, Vec3::Zero(), 0.5, 2.0, 0.0);
  const Vec3 x(1, 0.5, 0);
  const Vec3 y = circle.apply(x, 0.3);
  EXPECT_LT((circle.inverse().apply(y, 0.3) - x).norm(), 1e-12);
}

TEST(Motion, InverseTrajectoryPoint) {
  auto line = motions::translation_line({0, 1}, Vec3::Zero(), Vec3::UnitX());
  EXPECT_LT((line.inverse_trajectory_point(Vec3::UnitX(), 0.25) - Vec3(0.75, 0, 0)).norm(), 1e-15);
  for (const auto& fam : all_families()) {
    auto m = fam.build();
    const Vec3 w(0.3, -0.2, 0.8);
    const Vec3 x = m.apply(w, 0.41);
    EXPECT_LT((m.inverse_trajectory_point(x, 0.41) - w).norm(), 1e-13);
  }
}

TEST(Motion, FamilyInvariants) {
  std::mt19937 gen(7);
  for (const auto& fam : all_families()) {
    auto m = fam.build();
    auto inv = m.inverse();
    for (int i = 0; i < 1000; ++i) {
      const double t = rand_in(gen, m.interval().lo, m.interval().hi);
      const MotionJet j = m.jet(t);
      EXPECT_LE((j.A.transpose() * j.A - Mat3::Identity()).norm(), 1e-10) << to_string(fam.kind);
      EXPECT_NEAR(j.A.determinant(), 1.0, 1e-10);
      const Vec3 x(rand_in(gen, -2, 2), rand_in(gen, -2, 2), rand_in(gen, -2, 2));
      EXPECT_LT((inv.apply(m.apply(x, t), t) - x).norm(), 1e-10);
    }
  }
}

TEST(Motion, DerivativesMatchFiniteDifferences) {
  std::mt19937 gen(11);
  const double h = 1e-4;
  for (const auto& fam : all_families()) {
    for (const auto& m : {fam.build(), fam.build().inverse(), fam.build().rebased(0.2)}) {
      for (int i = 0; i < 50; ++i) {
        const double t = rand_in(gen, m.interval().lo + h, m.interval().hi - h);
        const MotionJet a = m.jet(t), lo = m.jet(t - h), hi = m.jet(t + h);
        EXPECT_LT((a.dA - (hi.A - lo.A) / (2 * h)).norm(), 1e-6);
        EXPECT_LT((a.db - (hi.b - lo.b) / (2 * h)).norm(), 1e-6);
        // Second derivatives against FD of the first: truncation scales with the
        // fourth derivative, so the bound is relative for fast families.
        EXPECT_LT((a.ddA - (hi.dA - lo.dA) / (2 * h)).norm(), 1e-6 * (1 + a.ddA.norm()));
        EXPECT_LT((a.ddb - (hi.db - lo.db) / (2 * h)).norm(), 1e-6 * (1 + a.ddb.norm()));
      }
    }
  }
}

// ÿ̄(t0) = −ÿ(t0) + 2 Ȧ(t0) ẏ(t0) for a motion rebased so that h(t0) is the identity,
// with y(t) = A(t) x + b(t) and ȳ(t) = A^T(t)(x − b(t)). Derivatives by FD only.
TEST(Motion, InverseTrajectoryIdentities) {
  std::mt19937 gen(3);
  const double h = 1e-4;
  for (const auto& fam : all_families()) {
    const RigidMotion base = fam.build();
    for (int i = 0; i < 20; ++i) {
      const double t0 = rand_in(gen, -0.5, 1.1);
      const RigidMotion m = base.rebased(t0);
      const Vec3 x(rand_in(gen, -1, 1), rand_in(gen, -1, 1), rand_in(gen, -1, 1));
      auto y = [&](double t) { return m.apply(x, t); };
      auto ybar = [&](double t) { return m.inverse_trajectory_point(x, t); };
      const Vec3 yd = (y(t0 + h) - y(t0 - h)) / (2 * h);
      const Vec3 ydd = (y(t0 + h) - 2 * y(t0) + y(t0 - h)) / (h * h);
      const Vec3 ybd = (ybar(t0 + h) - ybar(t0 - h)) / (2 * h);
      const Vec3 ybdd = (ybar(t0 + h) - 2 * ybar(t0) + ybar(t0 - h)) / (h * h);
      const Mat3 Ad = (m.evaluate(t0 + h).A - m.evaluate(t0 - h).A) / (2 * h);
      EXPECT_LT((ybd + yd).norm(), 1e-6) << to_string(fam.kind);
      EXPECT_LT((ybdd + ydd - 2 * Ad * yd).norm(), 1e-5) << to_string(fam.kind);
    }
  }
}

TEST(Motion, RebasedIsIdentityAtReference) {
  for (const auto& fam : all_families()) {
    const RigidMotion m = fam.build().rebased(0.3);
    const Pose p = m.evaluate(0.3);
    EXPECT_LT((p.A - Mat3::Identity()).norm(), 1e-14);
    EXPECT_LT(p.b.norm(), 1e-14);
  }
}

TEST(Motion, FamilyConfigErrors) {
  MotionFamily f;
  f.kind = MotionKind::Helix;
  f.params["bogus"] = {1};
  EXPECT_THROW(f.build(), SweepError);
  EXPECT_THROW(motion_kind_from_string("spiral"), SweepError);
  EXPECT_EQ(motion_kind_from_string("translation-circle"), MotionKind::TranslationCircle);
  MotionFamily g;
  g.kind = MotionKind::Screw;
  g.params["rate"] = {1, 2};
  EXPECT_THROW(g.build(), SweepError);
}
