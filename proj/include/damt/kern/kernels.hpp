#pragma once

#include <cstdint>
#include <string>

// Data-parallel inner loops behind the tensor ops. Every kernel has a scalar
// reference implementation and an AVX2+FMA variant; the front functions in
// damt::kern dispatch once at startup based on cpuid (override with the
// DAMT_KERNEL_BACKEND environment variable, values "scalar" or "avx2").
//
// gemm computes C = alpha * op(A) * op(B) + beta * C with row-major operands:
//   op(A) is M x K (A stored M x K when !trans_a, K x M when trans_a)
//   op(B) is K x N (B stored K x N when !trans_b, N x K when trans_b)
// Leading dimensions are the row strides of the *stored* matrices.

namespace damt::kern {

struct KernelTable {
    void (*gemm)(int m, int n, int k, float alpha, const float* a, int lda, bool trans_a,
                 const float* b, int ldb, bool trans_b, float beta, float* c, int ldc);
    void (*axpy)(int64_t n, float a, const float* x, float* y);
    void (*scale)(int64_t n, float a, float* x);
    void (*vadd)(int64_t n, const float* a, const float* b, float* out);
    void (*vmul)(int64_t n, const float* a, const float* b, float* out);
    float (*dot)(int64_t n, const float* a, const float* b);
    float (*reduce_sum)(int64_t n, const float* x);
    float (*reduce_max)(int64_t n, const float* x);
    void (*vexp)(int64_t n, const float* x, float* y);
    void (*softmax_rows)(int rows, int cols, const float* x, float* y);
    void (*gelu_fwd)(int64_t n, const float* x, float* y);
    void (*gelu_bwd)(int64_t n, const float* x, const float* dy, float* dx);
    void (*layernorm_fwd)(int rows, int cols, const float* x, const float* gamma,
                          const float* beta, float eps, float* y, float* mean, float* rstd);
    void (*layernorm_bwd)(int rows, int cols, const float* x, const float* gamma,
                          const float* mean, const float* rstd, const float* dy, float* dx,
                          float* dgamma, float* dbeta);
    void (*adamw)(int64_t n, float* p, const float* g, float* m, float* v, float lr,
                  float beta1, float beta2, float eps, float weight_decay, float bc1, float bc2);
};

namespace scalar {
extern const KernelTable table;
}
namespace avx2 {
extern const KernelTable table;  // safe to call only when avx2_supported()
}

bool avx2_supported();
const KernelTable& active();
const std::string& backend_name();

// --- dispatched front ---

inline void gemm(int m, int n, int k, float alpha, const float* a, int lda, bool trans_a,
                 const float* b, int ldb, bool trans_b, float beta, float* c, int ldc) {
    active().gemm(m, n, k, alpha, a, lda, trans_a, b, ldb, trans_b, beta, c, ldc);
}
// Common case: plain row-major matmul with tight leading dimensions.
inline void matmul(int m, int n, int k, const float* a, bool trans_a, const float* b,
                   bool trans_b, float* c, float beta = 0.0f, float alpha = 1.0f) {
    gemm(m, n, k, alpha, a, trans_a ? m : k, trans_a, b, trans_b ? k : n, trans_b, beta, c, n);
}
inline void axpy(int64_t n, float a, const float* x, float* y) { active().axpy(n, a, x, y); }
inline void scale(int64_t n, float a, float* x) { active().scale(n, a, x); }
inline void vadd(int64_t n, const float* a, const float* b, float* out) { active().vadd(n, a, b, out); }
inline void vmul(int64_t n, const float* a, const float* b, float* out) { active().vmul(n, a, b, out); }
inline float dot(int64_t n, const float* a, const float* b) { return active().dot(n, a, b); }
inline float reduce_sum(int64_t n, const float* x) { return active().reduce_sum(n, x); }
inline float reduce_max(int64_t n, const float* x) { return active().reduce_max(n, x); }
inline void vexp(int64_t n, const float* x, float* y) { active().vexp(n, x, y); }
inline void softmax_rows(int rows, int cols, const float* x, float* y) { active().softmax_rows(rows, cols, x, y); }
inline void gelu_fwd(int64_t n, const float* x, float* y) { active().gelu_fwd(n, x, y); }
inline void gelu_bwd(int64_t n, const float* x, const float* dy, float* dx) { active().gelu_bwd(n, x, dy, dx); }
inline void layernorm_fwd(int rows, int cols, const float* x, const float* gamma,
                          const float* beta, float eps, float* y, float* mean, float* rstd) {
    active().layernorm_fwd(rows, cols, x, gamma, beta, eps, y, mean, rstd);
}
inline void layernorm_bwd(int rows, int cols, const float* x, const float* gamma,
                          const float* mean, const float* rstd, const float* dy, float* dx,
                          float* dgamma, float* dbeta) {
    active().layernorm_bwd(rows, cols, x, gamma, mean, rstd, dy, dx, dgamma, dbeta);
}
inline void adamw(int64_t n, float* p, const float* g, float* m, float* v, float lr, float beta1,
                  float beta2, float eps, float weight_decay, float bc1, float bc2) {
    active().adamw(n, p, g, m, v, lr, beta1, beta2, eps, weight_decay, bc1, bc2);
}

}  // namespace damt::kern
