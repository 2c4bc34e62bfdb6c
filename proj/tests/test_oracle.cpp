#include "sweep/oracle.hpp"
#include "sweep/scene.hpp"
#include "sweep/simd/membership.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace sweep;

namespace {

const double kCapsuleVolume = 4.0 * kPi / 3.0 + kPi;

VoxelSweptVolume single_voxel() {
  VoxelSweptVolume v;
  v.dims = {5, 5, 5};
  v.spacing = 0.5;
  v.origin = Vec3(-1.25, -1.25, -1.25);
  v.occupancy.assign(125, 0);
  v.occupancy[v.index(2, 2, 2)] = 1;
  v.n_t = 1;
  return v;
}

}  // namespace

TEST(Times, NestedAndUniformAtPowersOfTwo) {
  const Interval I{-2, 2};
  const auto a = oracle_times(I, 32), b = oracle_times(I, 64);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k], b[k]);
  auto u = oracle_times(I, 17);
  std::sort(u.begin(), u.end());
  for (int k = 0; k <= 16; ++k) EXPECT_DOUBLE_EQ(u[k], -2 + 4.0 * k / 16);
  EXPECT_EQ(oracle_times(I, 1), std::vector<double>{-2.0});
}

TEST(Voxelize, SingleTimeIsTheSolid) {
  const SweptScene sc = golden_scene("capsule_helix").build();
  const VoxelSweptVolume v = voxelize(sc, 48, 1);
  const Solid& s = sc.solid();
  std::size_t mismatch = 0;
  for (int k = 0; k < v.dims[2]; ++k)
    for (int j = 0; j < v.dims[1]; ++j)
      for (int i = 0; i < v.dims[0]; ++i) {
        const Vec3 body = sc.motion().inverse_trajectory_point(v.center(i, j, k), sc.interval().lo);
        mismatch += (s.signed_measure(body) <= 1e-9) != v.occupied(i, j, k);
      }
  EXPECT_EQ(mismatch, 0u);
  EXPECT_GT(v.count(), 0u);
}

TEST(Voxelize, TranslatedSphereIsACapsule) {
  const SweptScene sc = golden_scene("sphere_translate").build();
  const VoxelSweptVolume v = voxelize(sc, 128, 64);
  EXPECT_NEAR(v.occupied_volume(), kCapsuleVolume, 0.02 * kCapsuleVolume);
  // The grid holds the sweep with a margin of two voxels.
  EXPECT_LE(v.origin.x(), -1.0 - 2 * v.spacing);
  EXPECT_GE(v.upper().x(), 2.0 + 2 * v.spacing);
  EXPECT_LE(std::max({v.dims[0], v.dims[1], v.dims[2]}), 128);
}

TEST(Voxelize, MonotoneInTimeSamples) {
  const SweptScene sc = golden_scene("capsule_helix").build();
  const VoxelSweptVolume a = voxelize(sc, 64, 32), b = voxelize(sc, 64, 64);
  ASSERT_EQ(a.occupancy.size(), b.occupancy.size());
  for (std::size_t i = 0; i < a.occupancy.size(); ++i) ASSERT_TRUE(!a.occupancy[i] || b.occupancy[i]);
  EXPECT_GT(b.count(), a.count());
}

TEST(Voxelize, ConvergesUnderRefinement) {
  for (const std::string& name : golden_scene_names()) {
    const SweptScene sc = golden_scene(name).build();
    auto at = [&](int res) {
      const VoxelSweptVolume coarse = voxelize(sc, res, 2);
      return voxelize(sc, res, time_samples_for_spacing(sc, coarse.spacing)).occupied_volume();
    };
    const double v128 = at(128), v256 = at(256);
    EXPECT_LT(std::abs(v256 - v128) / v256, 0.005) << name;
  }
}

TEST(Voxelize, ThreadCountDoesNotChangeResult) {
  const SweptScene sc = golden_scene("dumbbell_spin").build();
  VoxelizeOptions o;
  o.threads = 3;
  EXPECT_EQ(voxelize(sc, 64, 33).occupancy, voxelize(sc, 64, 33, o).occupancy);
}

TEST(Voxelize, Errors) {
  const SweptScene sc = golden_scene("sphere_translate").build();
  VoxelizeOptions o;
  o.max_voxels = 1000;
  try {
    voxelize(sc, 64, 4, o);
    FAIL();
  } catch (const SweepError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Resource);
  }
  EXPECT_THROW(voxelize(sc, 8, 4), SweepError);
}

TEST(Simd, KernelsAgreeBitForBit) {
  if (!simd::avx2_available()) GTEST_SKIP() << "no AVX2 on this CPU";
  std::mt19937 g(3);
  std::uniform_real_distribution<double> U(-2, 2), P(0.3, 1.5);
  const PrimitiveKind kinds[] = {PrimitiveKind::Sphere, PrimitiveKind::Capsule, PrimitiveKind::Ellipsoid,
                                 PrimitiveKind::Cassini};
  for (PrimitiveKind kind : kinds)
    for (int rep = 0; rep < 200; ++rep) {
      simd::RowQuery q;
      q.kind = kind;
      q.p = {P(g), P(g), P(g), 0.0};
      if (kind == PrimitiveKind::Cassini) q.p[1] = 0.9 * q.p[0];
      q.q0 = {U(g), U(g), U(g)};
      q.dq = {U(g) * 0.05, U(g) * 0.05, U(g) * 0.05};
      q.tol = rep % 2 ? 1e-9 : 0.0;
      const int n = 1 + rep % 97;
      std::vector<std::uint8_t> a(n, 0), b(n, 0);
      simd::mark_row_scalar(q, n, a.data());
      simd::mark_row_avx2(q, n, b.data());
      ASSERT_EQ(a, b) << "kind " << int(kind) << " rep " << rep;
    }
}

TEST(Simd, ScalarKernelMatchesPrimitive) {
  std::mt19937 g(8);
  std::uniform_real_distribution<double> U(-2, 2);
  Primitive caps;
  caps.kind = PrimitiveKind::Capsule;
  caps.p = {0.5, 1.0, 0, 0};
  Primitive ell;
  ell.kind = PrimitiveKind::Ellipsoid;
  ell.p = {2, 1, 1, 0};
  for (const Primitive& pr : {caps, ell})
    for (int k = 0; k < 2000; ++k) {
      const Vec3 x(U(g), U(g), U(g));
      simd::RowQuery q;
      q.kind = pr.kind;
      q.p = pr.p;
      q.q0 = {x.x(), x.y(), x.z()};
      std::uint8_t out = 0;
      simd::mark_row_scalar(q, 1, &out);
      const double m = pr.signed_measure(x);
      if (std::abs(m) > 1e-12) EXPECT_EQ(out != 0, m <= 0);
    }
}

TEST(Simd, VoxelizationIndependentOfBackend) {
  const SweptScene sc = golden_scene("capsule_helix").build();
  VoxelizeOptions scalar;
  scalar.force_scalar = true;
  EXPECT_EQ(voxelize(sc, 64, 65).occupancy, voxelize(sc, 64, 65, scalar).occupancy);
}

TEST(Classify, CapsuleScene) {
  const SweptScene sc = golden_scene("sphere_translate").build();
  const VoxelSweptVolume v = voxelize(sc, 128, 64);
  EXPECT_EQ(classify_point(v, Vec3(0.5, 0, 0)), VoxelClass::Interior);
  EXPECT_EQ(classify_point(v, Vec3(0.5, 1.0, 0)), VoxelClass::NearBoundary);
  EXPECT_EQ(classify_point(v, Vec3(-1.0, 0, 0)), VoxelClass::NearBoundary);
  EXPECT_EQ(classify_point(v, v.origin + Vec3::Constant(v.spacing)), VoxelClass::Exterior);
  EXPECT_THROW(classify_point(v, Vec3(10, 0, 0)), SweepError);
  // Random points on the analytic capsule surface.
  std::mt19937 g(2);
  std::uniform_real_distribution<double> U(0, 1);
  for (int k = 0; k < 500; ++k) {
    const double s = 2 * U(g) - 1, phi = 2 * kPi * U(g);
    const Vec3 d(s, std::sqrt(1 - s * s) * std::cos(phi), std::sqrt(1 - s * s) * std::sin(phi));
    const Vec3 x = d + Vec3(d.x() > 0 ? 1.0 : 0.0, 0, 0);
    EXPECT_EQ(classify_point(v, x), VoxelClass::NearBoundary);
  }
}

TEST(Classify, SingleVoxel) {
  const VoxelSweptVolume v = single_voxel();
  EXPECT_EQ(classify_point(v, Vec3::Zero()), VoxelClass::NearBoundary);
  // Face at x = 0.25; diagonal sqrt(3)/2.
  EXPECT_EQ(classify_point(v, Vec3(0.25 + 0.86, 0, 0)), VoxelClass::NearBoundary);
  EXPECT_EQ(classify_point(v, Vec3(0.25 + 0.87, 0, 0)), VoxelClass::Exterior);
  const auto bs = boundary_samples(v);
  EXPECT_EQ(bs.size(), 6u);
}

TEST(Export, OccupancyRoundTrip) {
  const SweptScene sc = golden_scene("sphere_circle").build();
  const VoxelSweptVolume v = voxelize(sc, 32, 9);
  std::stringstream ss;
  write_occupancy(ss, v);
  const VoxelSweptVolume w = read_occupancy(ss);
  EXPECT_EQ(w.dims, v.dims);
  EXPECT_EQ(w.origin, v.origin);
  EXPECT_EQ(w.spacing, v.spacing);
  EXPECT_EQ(w.n_t, v.n_t);
  EXPECT_EQ(w.occupancy, v.occupancy);
  std::stringstream bad("sweepkernel-voxels 1\ndims 2 2 2\ndata\nxx");
  EXPECT_THROW(read_occupancy(bad), SweepError);
}

TEST(Export, BlockyObj) {
  std::stringstream ss;
  write_occupancy_obj(ss, single_voxel());
  int verts = 0, faces = 0;
  std::string line;
  Vec3 sum = Vec3::Zero();
  std::vector<Vec3> V;
  std::vector<std::array<int, 4>> F;
  while (std::getline(ss, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Vec3 p;
      ls >> p.x() >> p.y() >> p.z();
      V.push_back(p);
      ++verts;
    } else if (tag == "f") {
      std::array<int, 4> f;
      ls >> f[0] >> f[1] >> f[2] >> f[3];
      F.push_back(f);
      ++faces;
    }
  }
  EXPECT_EQ(verts, 8);
  EXPECT_EQ(faces, 6);
  // Quads wind outward: the normal points away from the voxel center.
  for (const auto& f : F) {
    const Vec3 a = V[f[0] - 1], b = V[f[1] - 1], c = V[f[2] - 1];
    const Vec3 n = (b - a).cross(c - a);
    sum += n;
    EXPECT_GT(n.dot((a + c) / 2), 0.0);
  }
  EXPECT_LE(sum.norm(), 1e-12);
}

TEST(BoundaryAudit, CasesOnTranslatedSphere) {
  const SweptScene sc = golden_scene("sphere_translate").build();
  const BoundaryMatch left = match_boundary_sample(sc, Vec3(-1.2, 0.1, 0));
  EXPECT_EQ(left.kind, BoundaryCase::Ingress);
  EXPECT_EQ(left.t, 0.0);
  EXPECT_LT(left.g, 0.0);
  const BoundaryMatch right = match_boundary_sample(sc, Vec3(2.2, 0, -0.1));
  EXPECT_EQ(right.kind, BoundaryCase::Egress);
  EXPECT_EQ(right.t, 1.0);
  EXPECT_GT(right.g, 0.0);
  const BoundaryMatch side = match_boundary_sample(sc, Vec3(0.37, 0.8, 0.7));
  EXPECT_EQ(side.kind, BoundaryCase::Grazing);
  EXPECT_NEAR(side.t, 0.37, 1e-6);
  EXPECT_LE(std::abs(side.g), 1e-6);
  EXPECT_NEAR(side.x.norm(), 1.0, 1e-12);
  EXPECT_EQ(match_boundary_sample(sc, Vec3(0.5, 0, 0)).kind, BoundaryCase::Interior);
}

TEST(BoundaryAudit, VoxelBoundaryAudit) {
  for (const char* name : {"sphere_translate", "capsule_helix"}) {
    const SweptScene sc = golden_scene(name).build();
    const VoxelSweptVolume coarse = voxelize(sc, 64, 2);
    const VoxelSweptVolume v = voxelize(sc, 64, time_samples_for_spacing(sc, coarse.spacing));
    const BoundaryAudit a = endcap_ingress_egress_check(sc, boundary_samples(v, 7));
    EXPECT_TRUE(a.passed()) << name << " failed " << a.failed;
    EXPECT_GT(a.grazing, 0u);
    EXPECT_GT(a.ingress, 0u);
    EXPECT_GT(a.egress, 0u);
    EXPECT_LE(a.max_grazing_g, 1e-3);
    EXPECT_TRUE(a.exact_distance);
  }
}
