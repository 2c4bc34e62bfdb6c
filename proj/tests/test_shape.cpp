#include "sweep/shape.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace sweep;

namespace {

double rand_in(std::mt19937& g, double a, double b) { return std::uniform_real_distribution<double>(a, b)(g); }

std::vector<std::pair<std::string, SurfacePtr>> test_surfaces() {
  ChartMap warp;
  warp.M << 1.1, 0.2, -0.1, 0.9;
  warp.c = Vec2(0.1, -0.05);
  warp.e = Vec2(0.05, 0.04);
  return {
      {"sphere", make_sphere_chart(Vec3(0.1, 0.2, -0.3), 1.3)},
      {"ellipsoid", std::make_shared<EllipsoidChart>(Vec3::Zero(), Vec3(2, 1, 1))},
      {"capsule", std::make_shared<CapsuleChart>(0.7, 0.5)},
      {"dumbbell", make_cassini_chart(1.0, 0.8)},
      {"warped-sphere", std::make_shared<ReparamSurface>(make_sphere_chart(Vec3::Zero(), 1.0), warp)},
  };
}

Vec2 random_param(std::mt19937& g, const ParamRect& d) {
  const double vm = 0.02 * (d.v1 - d.v0);
  if (d.u0 < -1e8) return {rand_in(g, -1.0, 1.0), rand_in(g, -0.8, 0.8)};
  return {rand_in(g, d.u0, d.u1), rand_in(g, d.v0 + vm, d.v1 - vm)};
}

// Outward normal of an implicit solid measure by central differences.
Vec3 fd_gradient(const Primitive& p, const Vec3& x, double h = 1e-6) {
  Vec3 g;
  for (int i = 0; i < 3; ++i) {
    Vec3 e = Vec3::Zero();
    e[i] = h;
    g[i] = (p.signed_measure(x + e) - p.signed_measure(x - e)) / (2 * h);
  }
  return g.normalized();
}

}  // namespace

TEST(Shape, SphereNormalExample) {
  auto s = make_sphere_chart(Vec3::Zero(), 1.0);
  EXPECT_LT((normal(*s, 0, 0) - Vec3(1, 0, 0)).norm(), 1e-15);
  EXPECT_LT((normal(*s, 0.7, -0.3) - s->eval(0.7, -0.3)).norm(), 1e-15);
}

TEST(Shape, PoleIsDegenerate) {
  auto s = make_sphere_chart(Vec3::Zero(), 1.0);
  try {
    normal(*s, 0.3, kPi / 2);
    FAIL() << "expected regularity error";
  } catch (const SweepError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Regularity);
  }
  EXPECT_THROW(shape_operator(*s, 0.3, -kPi / 2), SweepError);
  EXPECT_FALSE(s->domain().contains(0.0, kPi / 2));
  EXPECT_TRUE(s->domain().contains(0.0, kPi / 2 - 2e-6));
}

TEST(Shape, EllipsoidNormalExample) {
  EllipsoidChart e(Vec3::Zero(), Vec3(2, 1, 1));
  EXPECT_LT((normal(e, 0, 0) - Vec3(1, 0, 0)).norm(), 1e-15);
  // Against the normalized gradient of x^2/4 + y^2 + z^2 - 1.
  std::mt19937 g(5);
  for (int i = 0; i < 200; ++i) {
    const double u = rand_in(g, -kPi, kPi), v = rand_in(g, -1.5, 1.5);
    const Vec3 x = e.eval(u, v);
    const Vec3 grad = Vec3(x.x() / 4, x.y(), x.z()).normalized();
    EXPECT_LT((normal(e, u, v) - grad).norm(), 1e-12);
  }
}

TEST(Shape, SphereShapeOperatorIsIdentity) {
  auto s = make_sphere_chart(Vec3::Zero(), 1.0);
  std::mt19937 g(1);
  for (int i = 0; i < 100; ++i) {
    const Mat2 W = shape_operator(*s, rand_in(g, -kPi, kPi), rand_in(g, -1.5, 1.5));
    EXPECT_LT((W - Mat2::Identity()).norm(), 1e-12);
  }
}

TEST(Shape, PlaneShapeOperatorIsZero) {
  // Cylinder part of the capsule is flat along the axis; use a sphere of huge radius
  // for a genuinely flat check instead: W scales as 1/R.
  auto s = make_sphere_chart(Vec3::Zero(), 1e8);
  EXPECT_LT(shape_operator(*s, 0.2, 0.1).norm(), 1e-7);
}

// Normal curvatures of the ellipsoid (2 cos v cos u, cos v sin u, sin v), checked
// against finite differences of the Gauss map taken from the implicit gradient.
TEST(Shape, EllipsoidCurvaturesAgainstGaussMapFD) {
  const Vec3 axes(2, 1, 1);
  EllipsoidChart e(Vec3::Zero(), axes);
  Primitive p;
  p.kind = PrimitiveKind::Ellipsoid;
  p.p = {2, 1, 1, 0};
  const double h = 1e-5;
  for (auto [u, v] : {std::pair{0.0, 0.0}, {kPi / 2, 0.0}, {0.4, 0.3}, {-2.0, -0.9}}) {
    const SurfaceJet j = e.jet(u, v);
    const Differential d = differential(j);
    for (const Vec2 dir : {Vec2(1, 0), Vec2(0, 1), Vec2(0.6, -0.8)}) {
      const Vec3 T = j.Su * dir.x() + j.Sv * dir.y();
      const Vec3 xp = e.eval(u + h * dir.x(), v + h * dir.y());
      const Vec3 xm = e.eval(u - h * dir.x(), v - h * dir.y());
      const Vec3 dN = (fd_gradient(p, xp) - fd_gradient(p, xm)) / (2 * h);
      const double kappa_fd = dN.dot(T) / T.squaredNorm();
      EXPECT_NEAR(normal_curvature(j, d, dir), kappa_fd, 1e-4) << u << "," << v;
    }
  }
  // At the long-axis tip both principal curvatures are a/b^2 = 2; at (pi/2, 0) the
  // u-direction curvature is b/a^2 = 1/4 and the v-direction curvature is 1/b = 1.
  const SurfaceJet tip = e.jet(0, 0);
  EXPECT_NEAR(normal_curvature(tip, differential(tip), Vec2(1, 0)), 2.0, 1e-12);
  EXPECT_NEAR(normal_curvature(tip, differential(tip), Vec2(0, 1)), 2.0, 1e-12);
  const SurfaceJet side = e.jet(kPi / 2, 0);
  EXPECT_NEAR(normal_curvature(side, differential(side), Vec2(1, 0)), 0.25, 1e-12);
  EXPECT_NEAR(normal_curvature(side, differential(side), Vec2(0, 1)), 1.0, 1e-12);
}

TEST(Shape, PartialsAndNormalsMatchFiniteDifferences) {
  std::mt19937 g(17);
  const double h = 1e-5;
  for (const auto& [name, s] : test_surfaces()) {
    for (int i = 0; i < 2000; ++i) {
      const Vec2 p = random_param(g, s->domain());
      const double u = p.x(), v = p.y();
      const SurfaceJet j = s->jet(u, v);
      const SurfaceJet ju1 = s->jet(u + h, v), ju0 = s->jet(u - h, v);
      const SurfaceJet jv1 = s->jet(u, v + h), jv0 = s->jet(u, v - h);
      // The capsule chart is only C^1 across the rims; skip second partials there.
      const bool near_rim = name == "capsule" && std::abs(std::abs(v) - 0.5) < 2 * h;
      ASSERT_LT((j.Su - (ju1.S - ju0.S) / (2 * h)).norm(), 1e-6) << name;
      ASSERT_LT((j.Sv - (jv1.S - jv0.S) / (2 * h)).norm(), 1e-6) << name;
      if (!near_rim) {
        ASSERT_LT((j.Suu - (ju1.Su - ju0.Su) / (2 * h)).norm(), 1e-6) << name;
        ASSERT_LT((j.Suv - (jv1.Su - jv0.Su) / (2 * h)).norm(), 1e-6) << name;
        ASSERT_LT((j.Svv - (jv1.Sv - jv0.Sv) / (2 * h)).norm(), 1e-6) << name;
        const Differential d = differential(j);
        ASSERT_LT((d.Nu - (differential(ju1).N - differential(ju0).N) / (2 * h)).norm(), 1e-6) << name;
        ASSERT_LT((d.Nv - (differential(jv1).N - differential(jv0).N) / (2 * h)).norm(), 1e-6) << name;
      }
    }
  }
}

TEST(Shape, ShapeOperatorSelfAdjoint) {
  std::mt19937 g(23);
  for (const auto& [name, s] : test_surfaces()) {
    for (int i = 0; i < 500; ++i) {
      const Vec2 p = random_param(g, s->domain());
      const Differential d = differential(s->jet(p.x(), p.y()));
      const Vec2 a(rand_in(g, -1, 1), rand_in(g, -1, 1)), b(rand_in(g, -1, 1), rand_in(g, -1, 1));
      const double lhs = (d.first_form * (d.W * a)).dot(b);
      const double rhs = (d.first_form * a).dot(d.W * b);
      EXPECT_NEAR(lhs, rhs, 1e-8) << name;
    }
  }
}

TEST(Shape, ContainsExamples) {
  const Solid ball = solids::sphere(Vec3::Zero(), 1.0);
  EXPECT_EQ(ball.contains(Vec3::Zero(), 1e-9), Containment::Inside);
  EXPECT_EQ(ball.contains(Vec3(1, 0, 0), 1e-9), Containment::OnBoundary);
  EXPECT_EQ(ball.contains(Vec3(1.1, 0, 0), 1e-9), Containment::Outside);
  const Solid cap = solids::capsule(1.0, 0.5);
  EXPECT_EQ(cap.contains(Vec3(0, 0, 1.5 + 1e-3), 1e-6), Containment::Outside);
  EXPECT_EQ(cap.contains(Vec3(0, 0, 1.5), 1e-9), Containment::OnBoundary);
  EXPECT_EQ(cap.contains(Vec3(0.99, 0, 0.4), 1e-6), Containment::Inside);
}

TEST(Shape, SolidsConsistentWithFaces) {
  std::mt19937 g(29);
  const std::vector<Solid> solids = {solids::sphere(Vec3(0.2, 0, 0), 1.2), solids::ellipsoid(Vec3::Zero(), {2, 1, 0.7}),
                                     solids::capsule(0.5, 1.0), solids::dumbbell(1.0, 0.8)};
  for (const Solid& s : solids) {
    for (const Face& f : s.faces) {
      for (int i = 0; i < 2000; ++i) {
        const double u = rand_in(g, f.domain.u0, f.domain.u1);
        const double v = rand_in(g, f.domain.v0, f.domain.v1);
        const SurfaceJet j = f.surface->jet(u, v);
        ASSERT_EQ(s.contains(j.S, 1e-9), Containment::OnBoundary) << s.name << " " << u << "," << v;
        const Vec3 N = differential(j).N;
        ASSERT_EQ(s.contains(j.S + 1e-4 * N, 1e-9), Containment::Outside) << s.name;
        ASSERT_EQ(s.contains(j.S - 1e-4 * N, 1e-9), Containment::Inside) << s.name;
        ASSERT_GE(differential(j).area, kRegularityFloor);
      }
    }
  }
}

TEST(Shape, CapsuleFacesMeetSmoothly) {
  const Solid cap = solids::capsule(0.8, 0.6);
  ASSERT_EQ(cap.edges.size(), 2u);
  for (const EdgeCurve& e : cap.edges) {
    for (int i = 0; i < 64; ++i) {
      const Vec2 uv = e.at(-kPi + 2 * kPi * i / 64.0);
      const Face& side = cap.faces[1];
      const Face& end = uv.y() > 0 ? cap.faces[2] : cap.faces[0];
      // Evaluate each face just inside its own subdomain and compare at the rim.
      const double eps = 1e-9;
      const Vec3 n_side = normal(*side.surface, uv.x(), uv.y() - (uv.y() > 0 ? eps : -eps));
      const Vec3 n_end = normal(*end.surface, uv.x(), uv.y() + (uv.y() > 0 ? eps : -eps));
      EXPECT_LT((n_side - n_end).norm(), 1e-6);
    }
  }
}

TEST(Shape, ProjectionRecoversFootpoint) {
  std::mt19937 g(31);
  for (const auto& [name, s] : test_surfaces()) {
    if (name == "warped-sphere") continue;
    for (int i = 0; i < 200; ++i) {
      const Vec2 p = random_param(g, s->domain());
      const SurfaceJet j = s->jet(p.x(), p.y());
      const Vec3 N = differential(j).N;
      const double off = rand_in(g, -0.05, 0.05);
      const Projection pr = project_to_surface(*s, j.S + off * N, p.x() + 0.02, p.y() - 0.02);
      EXPECT_NEAR(pr.signed_distance, off, 1e-10) << name;
      EXPECT_LT((pr.point - j.S).norm(), 1e-8) << name;
    }
  }
}

TEST(Shape, ChartMapInverse) {
  ChartMap m;
  m.M << 0.8, 0.3, -0.2, 1.2;
  m.e = Vec2(0.1, -0.07);
  const Vec2 ab(0.4, -0.3);
  EXPECT_LT((m.invert(m.apply(ab), Vec2::Zero()) - ab).norm(), 1e-13);
}
