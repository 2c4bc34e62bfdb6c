// Built with -mavx2 and no FMA so every lane rounds like the scalar kernel.
#include "sweep/simd/membership.hpp"

#include <immintrin.h>

namespace sweep::simd {

namespace {

inline __m256d sq(__m256d a) { return _mm256_mul_pd(a, a); }

inline __m256d norm3(__m256d x, __m256d y, __m256d z) {
  return _mm256_sqrt_pd(_mm256_add_pd(_mm256_add_pd(sq(x), sq(y)), sq(z)));
}

inline __m256d measure(const RowQuery& r, __m256d x, __m256d y, __m256d z) {
  const auto& p = r.p;
  switch (r.kind) {
    case PrimitiveKind::Sphere:
      return _mm256_sub_pd(norm3(x, y, z), _mm256_set1_pd(p[0]));
    case PrimitiveKind::Capsule: {
      const __m256d zc = _mm256_min_pd(_mm256_max_pd(z, _mm256_set1_pd(-p[1])), _mm256_set1_pd(p[1]));
      return _mm256_sub_pd(norm3(x, y, _mm256_sub_pd(z, zc)), _mm256_set1_pd(p[0]));
    }
    case PrimitiveKind::Ellipsoid: {
      const __m256d ax = _mm256_set1_pd(p[0] * p[0]), ay = _mm256_set1_pd(p[1] * p[1]), az = _mm256_set1_pd(p[2] * p[2]);
      const __m256d F = _mm256_sub_pd(
          _mm256_add_pd(_mm256_add_pd(_mm256_div_pd(sq(x), ax), _mm256_div_pd(sq(y), ay)), _mm256_div_pd(sq(z), az)),
          _mm256_set1_pd(1.0));
      const __m256d two = _mm256_set1_pd(2.0);
      const __m256d g = norm3(_mm256_div_pd(_mm256_mul_pd(two, x), ax), _mm256_div_pd(_mm256_mul_pd(two, y), ay),
                              _mm256_div_pd(_mm256_mul_pd(two, z), az));
      return _mm256_div_pd(F, _mm256_max_pd(g, _mm256_set1_pd(1e-300)));
    }
    case PrimitiveKind::Cassini: {
      const double c2s = p[1] * p[1];
      const __m256d c2 = _mm256_set1_pd(c2s);
      const __m256d r2 = _mm256_add_pd(_mm256_add_pd(sq(x), sq(y)), sq(z));
      const __m256d lin = _mm256_sub_pd(_mm256_sub_pd(sq(x), sq(y)), sq(z));
      const __m256d F = _mm256_sub_pd(_mm256_sub_pd(sq(r2), _mm256_mul_pd(_mm256_mul_pd(_mm256_set1_pd(2.0), c2), lin)),
                                      _mm256_set1_pd(p[0] * p[0] * p[0] * p[0] - c2s * c2s));
      const __m256d four = _mm256_set1_pd(4.0);
      const __m256d fr = _mm256_mul_pd(four, r2), fc = _mm256_mul_pd(four, c2);
      const __m256d gx = _mm256_sub_pd(_mm256_mul_pd(fr, x), _mm256_mul_pd(fc, x));
      const __m256d gy = _mm256_add_pd(_mm256_mul_pd(fr, y), _mm256_mul_pd(fc, y));
      const __m256d gz = _mm256_add_pd(_mm256_mul_pd(fr, z), _mm256_mul_pd(fc, z));
      return _mm256_div_pd(F, _mm256_max_pd(norm3(gx, gy, gz), _mm256_set1_pd(1e-12)));
    }
    case PrimitiveKind::None:
      break;
  }
  return _mm256_set1_pd(1.0);
}

}  // namespace

void mark_row_avx2(const RowQuery& r, int n, std::uint8_t* out) {
  const __m256d q0x = _mm256_set1_pd(r.q0[0]), q0y = _mm256_set1_pd(r.q0[1]), q0z = _mm256_set1_pd(r.q0[2]);
  const __m256d dx = _mm256_set1_pd(r.dq[0]), dy = _mm256_set1_pd(r.dq[1]), dz = _mm256_set1_pd(r.dq[2]);
  const __m256d tol = _mm256_set1_pd(r.tol);
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d di = _mm256_set_pd(i + 3, i + 2, i + 1, i);
    const __m256d x = _mm256_add_pd(q0x, _mm256_mul_pd(di, dx));
    const __m256d y = _mm256_add_pd(q0y, _mm256_mul_pd(di, dy));
    const __m256d z = _mm256_add_pd(q0z, _mm256_mul_pd(di, dz));
    const int mask = _mm256_movemask_pd(_mm256_cmp_pd(measure(r, x, y, z), tol, _CMP_LE_OQ));
    for (int l = 0; l < 4; ++l)
      if (mask >> l & 1) out[i + l] |= 1;
  }
  // Tail points use absolute indices, so they round like the scalar loop.
  for (; i < n; ++i) {
    const double di = i;
    const __m256d m = measure(r, _mm256_set1_pd(r.q0[0] + di * r.dq[0]), _mm256_set1_pd(r.q0[1] + di * r.dq[1]),
                              _mm256_set1_pd(r.q0[2] + di * r.dq[2]));
    if (_mm256_movemask_pd(_mm256_cmp_pd(m, tol, _CMP_LE_OQ)) & 1) out[i] |= 1;
  }
}

}  // namespace sweep::simd
