#include "sweep/oracle.hpp"

#include "sweep/parallel.hpp"
#include "sweep/simd/membership.hpp"
#include "sweep/trim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>

namespace sweep {

std::size_t VoxelSweptVolume::count() const {
  return static_cast<std::size_t>(std::count_if(occupancy.begin(), occupancy.end(), [](std::uint8_t c) { return c != 0; }));
}

double VoxelSweptVolume::occupied_volume() const { return static_cast<double>(count()) * spacing * spacing * spacing; }

namespace {

void require_membership(const SweptScene& scene) {
  if (!scene.solid().has_membership())
    throw SweepError(ErrorKind::Domain, "solid '" + scene.solid().name + "' has no closed-form membership");
}

Vec3 posed_center(const SweptScene& scene, double t) {
  return scene.motion().apply(scene.solid().bounding_center(), t);
}

double max_speed(const SweptScene& scene, int n) {
  const Interval I = scene.interval();
  const double reach = scene.solid().bounding_center().norm() + scene.solid().bounding_radius();
  double v = 0.0;
  for (int k = 0; k <= n; ++k) {
    const MotionJet m = scene.motion().jet(I.lo + I.length() * k / n);
    v = std::max(v, m.dA.norm() * reach + m.db.norm());
  }
  return v;
}

}  // namespace

std::vector<double> oracle_times(const Interval& I, int n_t) {
  std::vector<double> t;
  for (int k = 0; k < n_t; ++k) {
    if (k < 2) {
      t.push_back(k == 0 ? I.lo : I.hi);
      continue;
    }
    // Base-2 radical inverse of k - 1.
    double x = 0.0, w = 0.5;
    for (unsigned m = static_cast<unsigned>(k - 1); m; m >>= 1, w *= 0.5)
      if (m & 1) x += w;
    t.push_back(I.lo + I.length() * x);
  }
  return t;
}

int time_samples_for_spacing(const SweptScene& scene, double spacing) {
  if (!(spacing > 0)) throw SweepError(ErrorKind::Domain, "voxel spacing must be positive");
  const double steps = std::ceil(max_speed(scene, 1024) * scene.interval().length() / spacing);
  int n = 1;
  while (n < steps) n *= 2;
  return n + 1;
}

VoxelSweptVolume voxelize(const SweptScene& scene, int resolution, int n_t, const VoxelizeOptions& opt) {
  require_membership(scene);
  if (resolution < 16) throw SweepError(ErrorKind::Domain, "voxel resolution must be at least 16");
  if (n_t < 1) throw SweepError(ErrorKind::Domain, "n_t must be positive");
  const Interval I = scene.interval();
  const Primitive& prim = scene.solid().primitive;
  const double R = prim.bounding_radius();

  // Bounds of the continuous sweep from a dense run of posed centers.
  const int dense = 2048;
  Vec3 lo = Vec3::Constant(kInf), hi = Vec3::Constant(-kInf);
  double step = 0.0;
  Vec3 prev = posed_center(scene, I.lo);
  for (int k = 0; k <= dense; ++k) {
    const Vec3 c = posed_center(scene, I.lo + I.length() * k / dense);
    lo = lo.cwiseMin(c);
    hi = hi.cwiseMax(c);
    step = std::max(step, (c - prev).norm());
    prev = c;
  }
  const double pad = R + step;
  lo.array() -= pad;
  hi.array() += pad;
  const Vec3 ext = hi - lo;
  VoxelSweptVolume vol;
  vol.spacing = ext.maxCoeff() / (resolution - 4);
  vol.origin = lo - Vec3::Constant(2 * vol.spacing);
  std::size_t total = 1;
  for (int a = 0; a < 3; ++a) {
    vol.dims[a] = std::min(resolution, static_cast<int>(std::ceil(ext[a] / vol.spacing - 1e-9)) + 4);
    total *= static_cast<std::size_t>(vol.dims[a]);
  }
  if (total > opt.max_voxels)
    throw SweepError(ErrorKind::Resource, std::to_string(total) + " voxels exceed the cap of " + std::to_string(opt.max_voxels));
  vol.occupancy.assign(total, 0);
  vol.n_t = n_t;

  // Per time sample: world -> primitive-local affine map and the posed center.
  struct Slice {
    Mat3 M;
    Vec3 c, center;
  };
  const std::vector<double> times = oracle_times(I, n_t);
  std::vector<Slice> slices(n_t);
  for (int s = 0; s < n_t; ++s) {
    const Pose P = scene.motion().evaluate(times[s]);
    const Mat3 M = prim.frame.transpose() * P.A.transpose();
    slices[s] = {M, -(prim.frame.transpose() * (P.A.transpose() * P.b + prim.center)), P.apply(prim.center)};
  }

  const simd::RowKernel kernel = opt.force_scalar ? simd::mark_row_scalar : simd::row_kernel();
  const double h = vol.spacing;
  const double reach = R + opt.tol + h;
  parallel_for(static_cast<std::size_t>(vol.dims[2]), opt.threads, [&](std::size_t kk) {
    const int k = static_cast<int>(kk);
    simd::RowQuery q;
    q.kind = prim.kind;
    q.p = prim.p;
    q.tol = opt.tol;
    for (const Slice& s : slices) {
      const double dz = vol.origin.z() + (k + 0.5) * h - s.center.z();
      if (std::abs(dz) > reach) continue;
      const Vec3 dq = s.M.col(0) * h;
      for (int j = 0; j < vol.dims[1]; ++j) {
        const double dy = vol.origin.y() + (j + 0.5) * h - s.center.y();
        const double r2 = reach * reach - dy * dy - dz * dz;
        if (r2 < 0) continue;
        const double w = std::sqrt(r2);
        const int i0 = std::max(0, static_cast<int>(std::floor((s.center.x() - w - vol.origin.x()) / h - 0.5)));
        const int i1 = std::min(vol.dims[0] - 1, static_cast<int>(std::ceil((s.center.x() + w - vol.origin.x()) / h - 0.5)));
        if (i1 < i0) continue;
        const Vec3 q0 = s.M * vol.center(i0, j, k) + s.c;
        q.q0 = {q0.x(), q0.y(), q0.z()};
        q.dq = {dq.x(), dq.y(), dq.z()};
        kernel(q, i1 - i0 + 1, &vol.occupancy[vol.index(i0, j, k)]);
      }
    }
  });
  return vol;
}

const char* to_string(VoxelClass c) {
  switch (c) {
    case VoxelClass::Interior: return "Interior";
    case VoxelClass::NearBoundary: return "NearBoundary";
    case VoxelClass::Exterior: return "Exterior";
  }
  return "?";
}

VoxelClass classify_point(const VoxelSweptVolume& vol, const Vec3& x) {
  const Vec3 rel = (x - vol.origin) / vol.spacing;
  std::array<int, 3> c{};
  for (int a = 0; a < 3; ++a) {
    if (!(rel[a] >= 0 && rel[a] <= vol.dims[a]))
      throw SweepError(ErrorKind::Domain, "point lies outside the voxel grid");
    c[a] = std::min(vol.dims[a] - 1, static_cast<int>(std::floor(rel[a])));
  }
  const double h = vol.spacing, diag = std::sqrt(3.0) * h;
  auto occ = [&](int i, int j, int k) {
    if (i < 0 || j < 0 || k < 0 || i >= vol.dims[0] || j >= vol.dims[1] || k >= vol.dims[2]) return false;
    return vol.occupied(i, j, k);
  };
  const int r = 3;
  for (int k = c[2] - r; k <= c[2] + r; ++k)
    for (int j = c[1] - r; j <= c[1] + r; ++j)
      for (int i = c[0] - r; i <= c[0] + r; ++i) {
        if (!occ(i, j, k)) continue;
        const std::array<int, 3> v{i, j, k};
        for (int a = 0; a < 3; ++a)
          for (int sgn : {-1, 1}) {
            std::array<int, 3> n = v;
            n[a] += sgn;
            if (occ(n[0], n[1], n[2])) continue;
            // Distance from x to the shared face, an axis-aligned square.
            double d2 = 0.0;
            for (int b = 0; b < 3; ++b) {
              double e;
              if (b == a) {
                e = x[b] - (vol.origin[b] + (v[b] + (sgn > 0 ? 1 : 0)) * h);
              } else {
                const double lo = vol.origin[b] + v[b] * h;
                e = x[b] < lo ? lo - x[b] : std::max(0.0, x[b] - (lo + h));
              }
              d2 += e * e;
            }
            if (d2 <= diag * diag) return VoxelClass::NearBoundary;
          }
      }
  return vol.occupied(c[0], c[1], c[2]) ? VoxelClass::Interior : VoxelClass::Exterior;
}

std::vector<Vec3> boundary_samples(const VoxelSweptVolume& vol, std::size_t stride) {
  stride = std::max<std::size_t>(1, stride);
  std::vector<Vec3> out;
  std::size_t seen = 0;
  const auto& d = vol.dims;
  for (int k = 1; k + 1 < d[2]; ++k)
    for (int j = 1; j + 1 < d[1]; ++j)
      for (int i = 1; i + 1 < d[0]; ++i) {
        if (vol.occupied(i, j, k)) continue;
        const bool touches = vol.occupied(i - 1, j, k) || vol.occupied(i + 1, j, k) || vol.occupied(i, j - 1, k) ||
                             vol.occupied(i, j + 1, k) || vol.occupied(i, j, k - 1) || vol.occupied(i, j, k + 1);
        if (touches && seen++ % stride == 0) out.push_back(vol.center(i, j, k));
      }
  return out;
}

// ---------------------------------------------------------------------------

const char* to_string(BoundaryCase c) {
  switch (c) {
    case BoundaryCase::Grazing: return "grazing";
    case BoundaryCase::Ingress: return "ingress";
    case BoundaryCase::Egress: return "egress";
    case BoundaryCase::Interior: return "interior";
    case BoundaryCase::Failed: return "failed";
  }
  return "?";
}

namespace {

bool exact_distance(PrimitiveKind k) { return k == PrimitiveKind::Sphere || k == PrimitiveKind::Capsule; }

// Golden-section minimum of f on [a, b].
double golden_min(const std::function<double(double)>& f, double a, double b, double width) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > width) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return fc <= fd ? c : d;
}

}  // namespace

BoundaryMatch match_boundary_sample(const SweptScene& scene, const Vec3& y, const BoundaryAuditOptions& opt) {
  require_membership(scene);
  const Interval I = scene.interval();
  const Primitive& prim = scene.solid().primitive;
  auto dist = [&](double t) { return posed_measure(scene, y, t); };

  const int n = std::max(16, opt.time_samples);
  int best = 0;
  double fbest = kInf;
  for (int k = 0; k <= n; ++k) {
    const double v = dist(I.lo + I.length() * k / n);
    if (v < fbest) {
      fbest = v;
      best = k;
    }
  }
  const double a = I.lo + I.length() * std::max(0, best - 1) / n;
  const double b = I.lo + I.length() * std::min(n, best + 1) / n;
  double t = golden_min(dist, a, b, 1e-13 * std::max(1.0, I.length()));
  for (double e : {I.lo, I.hi})
    if (I.contains(e) && e >= a && e <= b && dist(e) <= dist(t)) t = e;

  BoundaryMatch m;
  m.sample = y;
  m.t = t;
  m.distance = dist(t);
  const Vec3 q = scene.motion().inverse_trajectory_point(y, t);
  Vec3 x = q;
  for (int it = 0; it < (exact_distance(prim.kind) ? 1 : 20); ++it) x -= prim.signed_measure(x) * prim.outward_normal(x);
  m.x = x;
  const MotionJet J = scene.motion().jet(t);
  m.g = (J.A * prim.outward_normal(x)).dot(J.dA * x + J.db);

  const bool at_lo = t == I.lo, at_hi = t == I.hi;
  if (m.distance < -1e-9) {
    m.kind = BoundaryCase::Interior;
  } else if (at_lo) {
    m.kind = m.g <= opt.margin ? BoundaryCase::Ingress : BoundaryCase::Failed;
  } else if (at_hi) {
    m.kind = m.g >= -opt.margin ? BoundaryCase::Egress : BoundaryCase::Failed;
  } else {
    m.kind = std::abs(m.g) <= opt.margin ? BoundaryCase::Grazing : BoundaryCase::Failed;
  }
  return m;
}

BoundaryAudit endcap_ingress_egress_check(const SweptScene& scene, const std::vector<Vec3>& samples,
                                          const BoundaryAuditOptions& opt) {
  require_membership(scene);
  std::vector<BoundaryMatch> matches(samples.size());
  parallel_for(samples.size(), opt.threads, [&](std::size_t i) { matches[i] = match_boundary_sample(scene, samples[i], opt); });
  BoundaryAudit audit;
  audit.samples = samples.size();
  audit.exact_distance = exact_distance(scene.solid().primitive.kind);
  for (const BoundaryMatch& m : matches) {
    switch (m.kind) {
      case BoundaryCase::Grazing:
        ++audit.grazing;
        audit.max_grazing_g = std::max(audit.max_grazing_g, std::abs(m.g));
        break;
      case BoundaryCase::Ingress: ++audit.ingress; break;
      case BoundaryCase::Egress: ++audit.egress; break;
      case BoundaryCase::Interior: ++audit.interior; break;
      case BoundaryCase::Failed:
        ++audit.failed;
        if (audit.failures.size() < 20) audit.failures.push_back(m);
        break;
    }
  }
  return audit;
}

// ---------------------------------------------------------------------------

void write_occupancy(std::ostream& os, const VoxelSweptVolume& vol) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g", vol.origin.x(), vol.origin.y(), vol.origin.z());
  os << "sweepkernel-voxels 1\n"
     << "dims " << vol.dims[0] << ' ' << vol.dims[1] << ' ' << vol.dims[2] << '\n'
     << "origin " << buf << '\n';
  std::snprintf(buf, sizeof buf, "%.17g", vol.spacing);
  os << "spacing " << buf << '\n' << "n_t " << vol.n_t << '\n' << "data\n";
  os.write(reinterpret_cast<const char*>(vol.occupancy.data()), static_cast<std::streamsize>(vol.occupancy.size()));
}

VoxelSweptVolume read_occupancy(std::istream& is) {
  auto bad = [](const std::string& what) { return SweepError(ErrorKind::Config, "voxel file: " + what); };
  std::string line, key;
  if (!std::getline(is, line) || line != "sweepkernel-voxels 1") throw bad("bad header");
  VoxelSweptVolume vol;
  for (;;) {
    if (!std::getline(is, line)) throw bad("missing data section");
    std::istringstream ls(line);
    ls >> key;
    if (key == "data") break;
    if (key == "dims") ls >> vol.dims[0] >> vol.dims[1] >> vol.dims[2];
    else if (key == "origin") ls >> vol.origin.x() >> vol.origin.y() >> vol.origin.z();
    else if (key == "spacing") ls >> vol.spacing;
    else if (key == "n_t") ls >> vol.n_t;
    else throw bad("unknown key '" + key + "'");
    if (!ls) throw bad("malformed '" + key + "' line");
  }
  const std::size_t n = static_cast<std::size_t>(vol.dims[0]) * vol.dims[1] * vol.dims[2];
  vol.occupancy.resize(n);
  is.read(reinterpret_cast<char*>(vol.occupancy.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) throw bad("truncated data");
  return vol;
}

void write_occupancy_obj(std::ostream& os, const VoxelSweptVolume& vol) {
  const auto& d = vol.dims;
  auto occ = [&](int i, int j, int k) {
    return i >= 0 && j >= 0 && k >= 0 && i < d[0] && j < d[1] && k < d[2] && vol.occupied(i, j, k);
  };
  // Corner (i, j, k) -> vertex index, 1-based, assigned on first use.
  std::vector<int> id(static_cast<std::size_t>(d[0] + 1) * (d[1] + 1) * (d[2] + 1), 0);
  int next = 1;
  char buf[128];
  auto vertex = [&](int i, int j, int k) {
    int& v = id[(static_cast<std::size_t>(k) * (d[1] + 1) + j) * (d[0] + 1) + i];
    if (v == 0) {
      const Vec3 p = vol.origin + vol.spacing * Vec3(i, j, k);
      std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", p.x(), p.y(), p.z());
      os << buf;
      v = next++;
    }
    return v;
  };
  std::ostringstream faces;
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        if (!vol.occupied(i, j, k)) continue;
        for (int a = 0; a < 3; ++a)
          for (int s : {0, 1}) {
            std::array<int, 3> n{i, j, k};
            n[a] += s ? 1 : -1;
            if (occ(n[0], n[1], n[2])) continue;
            // Face at coordinate index (v[a] + s) along axis a, wound outward.
            std::array<int, 3> base{i, j, k};
            base[a] += s;
            const int b = (a + 1) % 3, c = (a + 2) % 3;
            std::array<std::array<int, 3>, 4> q;
            for (int m = 0; m < 4; ++m) q[m] = base;
            q[1][b] += 1;
            q[2][b] += 1;
            q[2][c] += 1;
            q[3][c] += 1;
            if (!s) std::swap(q[1], q[3]);
            int ids[4];
            for (int m = 0; m < 4; ++m) ids[m] = vertex(q[m][0], q[m][1], q[m][2]);
            faces << "f " << ids[0] << ' ' << ids[1] << ' ' << ids[2] << ' ' << ids[3] << '\n';
          }
      }
  os << faces.str();
}

}  // namespace sweep
