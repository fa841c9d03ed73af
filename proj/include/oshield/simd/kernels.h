#pragma once

// Dense double-precision kernels used on the hot paths (MLP layers and
// compiled polynomial evaluation). Every kernel has a scalar reference and,
// where the CPU allows, a vectorized variant picked once at startup.

#include <cstddef>
#include <string_view>

namespace oshield::simd {

enum class Isa { kScalar, kAvx2, kNeon };

std::string_view isa_name(Isa isa);

struct KernelTable {
  Isa isa;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out[i] = max(in[i], 0)
  void (*relu)(const double* in, double* out, std::size_t n);
  // grad[i] = pre[i] > 0 ? grad[i] : 0
  void (*relu_backward)(const double* pre, double* grad, std::size_t n);
  // y[r] = bias[r] + sum_c a[r * cols + c] * x[c]; a is row-major rows x cols.
  void (*gemv)(const double* a, const double* x, const double* bias,
               double* y, std::size_t rows, std::size_t cols);
};

const KernelTable& scalar_kernels();
// Null when the ISA was not compiled in or the running CPU lacks it.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

// Best table the CPU supports, unless overridden with force_isa().
const KernelTable& active();
Isa active_isa();
// Test hook. Returns false (and changes nothing) if `isa` is unavailable.
bool force_isa(Isa isa);
void reset_isa();

}  // namespace oshield::simd
