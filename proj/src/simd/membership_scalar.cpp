#include "sweep/simd/membership.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>

namespace sweep::simd {

namespace {

inline double measure(const RowQuery& r, double x, double y, double z) {
  const auto& p = r.p;
  switch (r.kind) {
    case PrimitiveKind::Sphere:
      return std::sqrt(x * x + y * y + z * z) - p[0];
    case PrimitiveKind::Capsule: {
      const double zc = z < -p[1] ? -p[1] : (p[1] < z ? p[1] : z);
      const double d = z - zc;
      return std::sqrt(x * x + y * y + d * d) - p[0];
    }
    case PrimitiveKind::Ellipsoid: {
      const double ax = p[0] * p[0], ay = p[1] * p[1], az = p[2] * p[2];
      const double F = x * x / ax + y * y / ay + z * z / az - 1.0;
      const double gx = 2 * x / ax, gy = 2 * y / ay, gz = 2 * z / az;
      const double g = std::sqrt(gx * gx + gy * gy + gz * gz);
      return F / (g < 1e-300 ? 1e-300 : g);
    }
    case PrimitiveKind::Cassini: {
      const double c2 = p[1] * p[1], r2 = x * x + y * y + z * z;
      const double F = r2 * r2 - 2.0 * c2 * (x * x - y * y - z * z) - (p[0] * p[0] * p[0] * p[0] - c2 * c2);
      const double gx = 4.0 * r2 * x - 4.0 * c2 * x, gy = 4.0 * r2 * y + 4.0 * c2 * y, gz = 4.0 * r2 * z + 4.0 * c2 * z;
      const double g = std::sqrt(gx * gx + gy * gy + gz * gz);
      return F / (g < 1e-12 ? 1e-12 : g);
    }
    case PrimitiveKind::None:
      break;
  }
  return 1.0;
}

}  // namespace

void mark_row_scalar(const RowQuery& r, int n, std::uint8_t* out) {
  for (int i = 0; i < n; ++i) {
    const double di = i;
    const double x = r.q0[0] + di * r.dq[0], y = r.q0[1] + di * r.dq[1], z = r.q0[2] + di * r.dq[2];
    if (measure(r, x, y, z) <= r.tol) out[i] |= 1;
  }
}

bool avx2_available() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

namespace {
bool force_scalar() {
  const char* s = std::getenv("SWEEPKERNEL_SIMD");
  return s && std::strcmp(s, "scalar") == 0;
}
}  // namespace

RowKernel row_kernel() {
  static const RowKernel k = (avx2_available() && !force_scalar()) ? mark_row_avx2 : mark_row_scalar;
  return k;
}

const char* row_kernel_name() { return row_kernel() == mark_row_avx2 ? "avx2" : "scalar"; }

}  // namespace sweep::simd
