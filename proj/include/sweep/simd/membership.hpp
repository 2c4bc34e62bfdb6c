#pragma once

#include "sweep/shape.hpp"

#include <array>
#include <cstdint>

namespace sweep::simd {

// One row of query points q_i = q0 + i dq, i in [0, n), in primitive-local
// coordinates (after the frame and center are removed). A point is marked when
// its signed measure is at most `tol`, with the measure computed exactly as
// Primitive::signed_measure defines it.
struct RowQuery {
  PrimitiveKind kind = PrimitiveKind::Sphere;
  std::array<double, 4> p{};
  std::array<double, 3> q0{};
  std::array<double, 3> dq{};
  double tol = 0.0;
};

// out[i] |= 1 for marked points. The two kernels perform the same IEEE
// operations in the same order and must agree bit for bit.
void mark_row_scalar(const RowQuery& q, int n, std::uint8_t* out);
void mark_row_avx2(const RowQuery& q, int n, std::uint8_t* out);

using RowKernel = void (*)(const RowQuery&, int, std::uint8_t*);

bool avx2_available();
// AVX2 when the CPU has it, unless SWEEPKERNEL_SIMD=scalar.
RowKernel row_kernel();
const char* row_kernel_name();

}  // namespace sweep::simd
