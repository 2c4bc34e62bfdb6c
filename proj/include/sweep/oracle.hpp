#pragma once

#include "sweep/funnel.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace sweep {

// Occupancy of ⋃ M(t_i) over the times of oracle_times, sampled at voxel centers.
struct VoxelSweptVolume {
  Vec3 origin = Vec3::Zero();  // corner of voxel (0, 0, 0)
  double spacing = 0.0;
  std::array<int, 3> dims{0, 0, 0};
  std::vector<std::uint8_t> occupancy;  // x fastest
  int n_t = 0;

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i;
  }
  bool occupied(int i, int j, int k) const { return occupancy[index(i, j, k)] != 0; }
  Vec3 center(int i, int j, int k) const { return origin + spacing * Vec3(i + 0.5, j + 0.5, k + 0.5); }
  Vec3 upper() const { return origin + spacing * Vec3(dims[0], dims[1], dims[2]); }
  std::size_t count() const;
  double occupied_volume() const;
};

struct VoxelizeOptions {
  int threads = 1;
  double tol = 1e-9;                      // Inside/OnBoundary: measure <= tol
  std::size_t max_voxels = std::size_t(1) << 28;
  bool force_scalar = false;              // skip the AVX2 kernel
};

// Time samples: t0, t1, then the base-2 radical-inverse points of I. Every n_t is
// a prefix of any larger one, so occupancy never shrinks as n_t grows, and
// n_t = 2^k + 1 gives the uniform grid.
std::vector<double> oracle_times(const Interval& I, int n_t);

// `resolution` voxels along the longest axis of the bounding box, which holds the
// whole continuous sweep with a 2-voxel margin. n_t = 1 voxelizes M(t0) alone.
VoxelSweptVolume voxelize(const SweptScene& scene, int resolution, int n_t, const VoxelizeOptions& opt = {});

// Smallest n_t = 2^k + 1 for which no point of the solid moves more than
// `spacing` between consecutive time samples.
int time_samples_for_spacing(const SweptScene& scene, double spacing);

enum class VoxelClass { Interior, NearBoundary, Exterior };
const char* to_string(VoxelClass c);

// NearBoundary iff x is within one voxel diagonal of a face shared by an occupied
// and an empty voxel; otherwise the class of the voxel holding x.
VoxelClass classify_point(const VoxelSweptVolume& vol, const Vec3& x);

// Empty voxel centers with an occupied 6-neighbour, every `stride`-th one in
// index order.
std::vector<Vec3> boundary_samples(const VoxelSweptVolume& vol, std::size_t stride = 1);

// ---------------------------------------------------------------------------
// Ingress / egress / grazing audit

enum class BoundaryCase { Grazing, Ingress, Egress, Interior, Failed };
const char* to_string(BoundaryCase c);

struct BoundaryMatch {
  Vec3 sample = Vec3::Zero();
  double t = 0.0;
  Vec3 x = Vec3::Zero();  // body point on ∂M
  double distance = 0.0;  // signed distance from the sample to ∂M(t)
  double g = 0.0;         // <A(t) N(x), v_x(t)>
  BoundaryCase kind = BoundaryCase::Failed;
};

struct BoundaryAuditOptions {
  double margin = 1e-3;
  int time_samples = 512;
  int threads = 1;
};

struct BoundaryAudit {
  std::size_t samples = 0;
  std::size_t grazing = 0, ingress = 0, egress = 0;
  std::size_t interior = 0;  // inside the continuous sweep: not a boundary point
  std::size_t failed = 0;
  double max_grazing_g = 0.0;
  bool exact_distance = true;  // the solid's measure is a true distance
  std::vector<BoundaryMatch> failures;

  bool passed() const { return failed == 0 && samples > interior; }
};

// Matches each sample y to (x, t): t minimizes the distance from y to M(t) over
// I, and x ∈ ∂M is the closest point. At an interior minimum g = 0 (grazing); at
// t0 the distance grows, so g <= 0 (ingress); at t1 it shrinks, so g >= 0 (egress).
BoundaryMatch match_boundary_sample(const SweptScene& scene, const Vec3& y, const BoundaryAuditOptions& opt = {});
BoundaryAudit endcap_ingress_egress_check(const SweptScene& scene, const std::vector<Vec3>& samples,
                                          const BoundaryAuditOptions& opt = {});

// ---------------------------------------------------------------------------
// Export

// Text header ("sweepkernel-voxels 1", dims, origin, spacing, n_t) followed by
// one byte per voxel, x fastest.
void write_occupancy(std::ostream& os, const VoxelSweptVolume& vol);
VoxelSweptVolume read_occupancy(std::istream& is);
// Blocky isosurface: one quad per occupied/empty face.
void write_occupancy_obj(std::ostream& os, const VoxelSweptVolume& vol);

}  // namespace sweep
