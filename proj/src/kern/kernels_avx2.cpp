// AVX2+FMA kernel variants. Compiled with -mavx2 -mfma; only reachable
// through the dispatch table after the runtime cpuid check.

#include <immintrin.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "damt/kern/kernels.hpp"

namespace damt::kern::avx2 {

namespace {

// ---- vectorized exp (Cephes-style polynomial, ~1e-7 relative error) ----

inline __m256 exp256(__m256 x) {
    const __m256 hi = _mm256_set1_ps(88.3762626647949f);
    const __m256 lo = _mm256_set1_ps(-87.3365478515625f);
    const __m256 log2e = _mm256_set1_ps(1.44269504088896341f);
    const __m256 c1 = _mm256_set1_ps(0.693359375f);
    const __m256 c2 = _mm256_set1_ps(-2.12194440e-4f);
    const __m256 half = _mm256_set1_ps(0.5f);
    const __m256 one = _mm256_set1_ps(1.0f);

    x = _mm256_min_ps(_mm256_max_ps(x, lo), hi);
    __m256 fx = _mm256_fmadd_ps(x, log2e, half);
    fx = _mm256_floor_ps(fx);
    x = _mm256_fnmadd_ps(fx, c1, x);
    x = _mm256_fnmadd_ps(fx, c2, x);

    const __m256 z = _mm256_mul_ps(x, x);
    __m256 y = _mm256_set1_ps(1.9875691500e-4f);
    y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.3981999507e-3f));
    y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(8.3334519073e-3f));
    y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(4.1665795894e-2f));
    y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.6666665459e-1f));
    y = _mm256_fmadd_ps(y, x, half);
    y = _mm256_fmadd_ps(y, z, _mm256_add_ps(x, one));

    const __m256i n = _mm256_cvtps_epi32(fx);
    const __m256i pow2 = _mm256_slli_epi32(_mm256_add_epi32(n, _mm256_set1_epi32(127)), 23);
    return _mm256_mul_ps(y, _mm256_castsi256_ps(pow2));
}

inline __m256 tanh256(__m256 x) {
    // tanh(x) = 1 - 2 / (exp(2x) + 1)
    const __m256 one = _mm256_set1_ps(1.0f);
    const __m256 two = _mm256_set1_ps(2.0f);
    const __m256 e = exp256(_mm256_mul_ps(x, two));
    return _mm256_sub_ps(one, _mm256_div_ps(two, _mm256_add_ps(e, one)));
}

inline float hsum(__m256 v) {
    __m128 s = _mm_add_ps(_mm256_castps256_ps128(v), _mm256_extractf128_ps(v, 1));
    s = _mm_add_ps(s, _mm_movehl_ps(s, s));
    s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 1));
    return _mm_cvtss_f32(s);
}

inline __m256i tail_mask(int r) {
    alignas(32) static const int32_t bits[16] = {-1, -1, -1, -1, -1, -1, -1, -1,
                                                 0,  0,  0,  0,  0,  0,  0,  0};
    return _mm256_loadu_si256(reinterpret_cast<const __m256i*>(bits + 8 - r));
}

// ---- GEMM ----
// Packed, blocked: MC x KC panels of op(A), KC x NC panels of op(B) (columns
// zero-padded to a multiple of 8 so the microkernel never masks B loads).

constexpr int MR = 6;
constexpr int NR = 16;
constexpr int MC = 72;
constexpr int KC = 256;
constexpr int NC = 192;

inline float mat_at(const float* m, int ld, bool trans, int r, int c) {
    return trans ? m[int64_t(c) * ld + r] : m[int64_t(r) * ld + c];
}

void pack_a(const float* a, int lda, bool trans, int i0, int p0, int mc, int kc, float* ap) {
    if (!trans) {
        for (int i = 0; i < mc; ++i) {
            const float* src = a + int64_t(i0 + i) * lda + p0;
            float* dst = ap + int64_t(i) * kc;
            for (int p = 0; p < kc; ++p) dst[p] = src[p];
        }
    } else {
        for (int i = 0; i < mc; ++i) {
            float* dst = ap + int64_t(i) * kc;
            for (int p = 0; p < kc; ++p) dst[p] = a[int64_t(p0 + p) * lda + (i0 + i)];
        }
    }
}

void pack_b(const float* b, int ldb, bool trans, int p0, int j0, int kc, int nc, int nc_pad,
            float* bp) {
    for (int p = 0; p < kc; ++p) {
        float* dst = bp + int64_t(p) * nc_pad;
        if (!trans) {
            const float* src = b + int64_t(p0 + p) * ldb + j0;
            for (int j = 0; j < nc; ++j) dst[j] = src[j];
        } else {
            for (int j = 0; j < nc; ++j) dst[j] = b[int64_t(j0 + j) * ldb + (p0 + p)];
        }
        for (int j = nc; j < nc_pad; ++j) dst[j] = 0.0f;
    }
}

// mr x 16 microkernel over packed panels; acc kept in registers.
template <int mr>
inline void mk16(int kc, const float* ap, int ap_stride, const float* bp, int bp_stride,
                 float* acc /* mr*16 */) {
    __m256 c0[mr], c1[mr];
    for (int i = 0; i < mr; ++i) {
        c0[i] = _mm256_setzero_ps();
        c1[i] = _mm256_setzero_ps();
    }
    for (int p = 0; p < kc; ++p) {
        const __m256 b0 = _mm256_loadu_ps(bp + int64_t(p) * bp_stride);
        const __m256 b1 = _mm256_loadu_ps(bp + int64_t(p) * bp_stride + 8);
        for (int i = 0; i < mr; ++i) {
            const __m256 av = _mm256_set1_ps(ap[int64_t(i) * ap_stride + p]);
            c0[i] = _mm256_fmadd_ps(av, b0, c0[i]);
            c1[i] = _mm256_fmadd_ps(av, b1, c1[i]);
        }
    }
    for (int i = 0; i < mr; ++i) {
        _mm256_storeu_ps(acc + i * 16, c0[i]);
        _mm256_storeu_ps(acc + i * 16 + 8, c1[i]);
    }
}

template <int mr>
inline void mk8(int kc, const float* ap, int ap_stride, const float* bp, int bp_stride,
                float* acc /* mr*8 */) {
    __m256 c0[mr];
    for (int i = 0; i < mr; ++i) c0[i] = _mm256_setzero_ps();
    for (int p = 0; p < kc; ++p) {
        const __m256 b0 = _mm256_loadu_ps(bp + int64_t(p) * bp_stride);
        for (int i = 0; i < mr; ++i) {
            const __m256 av = _mm256_set1_ps(ap[int64_t(i) * ap_stride + p]);
            c0[i] = _mm256_fmadd_ps(av, b0, c0[i]);
        }
    }
    for (int i = 0; i < mr; ++i) _mm256_storeu_ps(acc + i * 8, c0[i]);
}

using Mk16Fn = void (*)(int, const float*, int, const float*, int, float*);
using Mk8Fn = void (*)(int, const float*, int, const float*, int, float*);
constexpr Mk16Fn kMk16[MR] = {mk16<1>, mk16<2>, mk16<3>, mk16<4>, mk16<5>, mk16<6>};
constexpr Mk8Fn kMk8[MR] = {mk8<1>, mk8<2>, mk8<3>, mk8<4>, mk8<5>, mk8<6>};

void gemm_impl(int m, int n, int k, float alpha, const float* a, int lda, bool trans_a,
               const float* b, int ldb, bool trans_b, float beta, float* c, int ldc) {
    if (m == 0 || n == 0) return;
    if (k == 0 || alpha == 0.0f) {
        for (int i = 0; i < m; ++i) {
            float* crow = c + int64_t(i) * ldc;
            if (beta == 0.0f)
                for (int j = 0; j < n; ++j) crow[j] = 0.0f;
            else if (beta != 1.0f)
                for (int j = 0; j < n; ++j) crow[j] *= beta;
        }
        return;
    }

    thread_local std::vector<float> apack, bpack;
    apack.resize(size_t(MC) * KC);
    bpack.resize(size_t(KC) * (NC + 8));
    alignas(32) float acc[MR * NR];

    for (int jc = 0; jc < n; jc += NC) {
        const int nc = std::min(NC, n - jc);
        const int nc_pad = (nc + 7) & ~7;
        for (int pc = 0; pc < k; pc += KC) {
            const int kc = std::min(KC, k - pc);
            pack_b(b, ldb, trans_b, pc, jc, kc, nc, nc_pad, bpack.data());
            const float beta_eff = (pc == 0) ? beta : 1.0f;
            for (int ic = 0; ic < m; ic += MC) {
                const int mc = std::min(MC, m - ic);
                pack_a(a, lda, trans_a, ic, pc, mc, kc, apack.data());
                for (int ir = 0; ir < mc; ir += MR) {
                    const int mr = std::min(MR, mc - ir);
                    const float* ap = apack.data() + int64_t(ir) * kc;
                    for (int jr = 0; jr < nc;) {
                        const int rem = nc - jr;
                        const float* bp = bpack.data() + jr;
                        if (rem >= NR) {
                            kMk16[mr - 1](kc, ap, kc, bp, nc_pad, acc);
                            for (int i = 0; i < mr; ++i) {
                                float* crow = c + int64_t(ic + ir + i) * ldc + jc + jr;
                                __m256 v0 = _mm256_mul_ps(_mm256_set1_ps(alpha),
                                                          _mm256_loadu_ps(acc + i * 16));
                                __m256 v1 = _mm256_mul_ps(_mm256_set1_ps(alpha),
                                                          _mm256_loadu_ps(acc + i * 16 + 8));
                                if (beta_eff != 0.0f) {
                                    v0 = _mm256_fmadd_ps(_mm256_set1_ps(beta_eff),
                                                         _mm256_loadu_ps(crow), v0);
                                    v1 = _mm256_fmadd_ps(_mm256_set1_ps(beta_eff),
                                                         _mm256_loadu_ps(crow + 8), v1);
                                }
                                _mm256_storeu_ps(crow, v0);
                                _mm256_storeu_ps(crow + 8, v1);
                            }
                            jr += NR;
                        } else {
                            // 8-wide chunk; B panel columns are zero-padded so the
                            // load is always safe, only the C store is masked.
                            const int nr = std::min(8, rem);
                            kMk8[mr - 1](kc, ap, kc, bp, nc_pad, acc);
                            const __m256i mask = tail_mask(nr);
                            for (int i = 0; i < mr; ++i) {
                                float* crow = c + int64_t(ic + ir + i) * ldc + jc + jr;
                                __m256 v = _mm256_mul_ps(_mm256_set1_ps(alpha),
                                                         _mm256_loadu_ps(acc + i * 8));
                                if (beta_eff != 0.0f) {
                                    const __m256 cv = _mm256_maskload_ps(crow, mask);
                                    v = _mm256_fmadd_ps(_mm256_set1_ps(beta_eff), cv, v);
                                }
                                _mm256_maskstore_ps(crow, mask, v);
                            }
                            jr += nr;
                        }
                    }
                }
            }
        }
    }
    (void)mat_at;
}

// ---- elementwise / reductions ----

void axpy_impl(int64_t n, float a, const float* x, float* y) {
    const __m256 av = _mm256_set1_ps(a);
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

void scale_impl(int64_t n, float a, float* x) {
    const __m256 av = _mm256_set1_ps(a);
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) _mm256_storeu_ps(x + i, _mm256_mul_ps(av, _mm256_loadu_ps(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

void vadd_impl(int64_t n, const float* a, const float* b, float* out) {
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void vmul_impl(int64_t n, const float* a, const float* b, float* out) {
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

float dot_impl(int64_t n, const float* a, const float* b) {
    __m256 acc = _mm256_setzero_ps();
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        acc = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc);
    float s = hsum(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

float reduce_sum_impl(int64_t n, const float* x) {
    __m256 acc = _mm256_setzero_ps();
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) acc = _mm256_add_ps(acc, _mm256_loadu_ps(x + i));
    float s = hsum(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

float reduce_max_impl(int64_t n, const float* x) {
    float m = x[0];
    int64_t i = 0;
    if (n >= 8) {
        __m256 mv = _mm256_loadu_ps(x);
        for (i = 8; i + 8 <= n; i += 8) mv = _mm256_max_ps(mv, _mm256_loadu_ps(x + i));
        alignas(32) float tmp[8];
        _mm256_store_ps(tmp, mv);
        for (float t : tmp) m = t > m ? t : m;
    }
    for (; i < n; ++i) m = x[i] > m ? x[i] : m;
    return m;
}

void vexp_impl(int64_t n, const float* x, float* y) {
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, exp256(_mm256_loadu_ps(x + i)));
    for (; i < n; ++i) y[i] = std::exp(x[i]);
}

void softmax_rows_impl(int rows, int cols, const float* x, float* y) {
    for (int r = 0; r < rows; ++r) {
        const float* xr = x + int64_t(r) * cols;
        float* yr = y + int64_t(r) * cols;
        const float m = reduce_max_impl(cols, xr);
        const __m256 mv = _mm256_set1_ps(m);
        __m256 acc = _mm256_setzero_ps();
        int j = 0;
        for (; j + 8 <= cols; j += 8) {
            const __m256 e = exp256(_mm256_sub_ps(_mm256_loadu_ps(xr + j), mv));
            _mm256_storeu_ps(yr + j, e);
            acc = _mm256_add_ps(acc, e);
        }
        float s = hsum(acc);
        for (; j < cols; ++j) {
            yr[j] = std::exp(xr[j] - m);
            s += yr[j];
        }
        scale_impl(cols, 1.0f / s, yr);
    }
}

constexpr float kGeluC = 0.7978845608028654f;
constexpr float kGeluA = 0.044715f;

void gelu_fwd_impl(int64_t n, const float* x, float* y) {
    const __m256 cg = _mm256_set1_ps(kGeluC);
    const __m256 ca = _mm256_set1_ps(kGeluA);
    const __m256 half = _mm256_set1_ps(0.5f);
    const __m256 one = _mm256_set1_ps(1.0f);
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 v = _mm256_loadu_ps(x + i);
        const __m256 v3 = _mm256_mul_ps(_mm256_mul_ps(v, v), v);
        const __m256 u = _mm256_mul_ps(cg, _mm256_fmadd_ps(ca, v3, v));
        const __m256 t = tanh256(u);
        _mm256_storeu_ps(y + i, _mm256_mul_ps(_mm256_mul_ps(half, v), _mm256_add_ps(one, t)));
    }
    for (; i < n; ++i) {
        const float v = x[i];
        const float u = kGeluC * (v + kGeluA * v * v * v);
        y[i] = 0.5f * v * (1.0f + std::tanh(u));
    }
}

void gelu_bwd_impl(int64_t n, const float* x, const float* dy, float* dx) {
    const __m256 cg = _mm256_set1_ps(kGeluC);
    const __m256 ca3 = _mm256_set1_ps(3.0f * kGeluA);
    const __m256 ca = _mm256_set1_ps(kGeluA);
    const __m256 half = _mm256_set1_ps(0.5f);
    const __m256 one = _mm256_set1_ps(1.0f);
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 v = _mm256_loadu_ps(x + i);
        const __m256 v2 = _mm256_mul_ps(v, v);
        const __m256 u = _mm256_mul_ps(cg, _mm256_fmadd_ps(ca, _mm256_mul_ps(v2, v), v));
        const __m256 t = tanh256(u);
        const __m256 du = _mm256_mul_ps(cg, _mm256_fmadd_ps(ca3, v2, one));
        const __m256 sech2 = _mm256_fnmadd_ps(t, t, one);
        __m256 g = _mm256_mul_ps(half, _mm256_add_ps(one, t));
        g = _mm256_fmadd_ps(_mm256_mul_ps(_mm256_mul_ps(half, v), sech2), du, g);
        _mm256_storeu_ps(dx + i, _mm256_mul_ps(_mm256_loadu_ps(dy + i), g));
    }
    for (; i < n; ++i) {
        const float v = x[i];
        const float u = kGeluC * (v + kGeluA * v * v * v);
        const float t = std::tanh(u);
        const float du = kGeluC * (1.0f + 3.0f * kGeluA * v * v);
        dx[i] = dy[i] * (0.5f * (1.0f + t) + 0.5f * v * (1.0f - t * t) * du);
    }
}

void layernorm_fwd_impl(int rows, int cols, const float* x, const float* gamma,
                        const float* beta, float eps, float* y, float* mean, float* rstd) {
    for (int r = 0; r < rows; ++r) {
        const float* xr = x + int64_t(r) * cols;
        float* yr = y + int64_t(r) * cols;
        const float mu = reduce_sum_impl(cols, xr) / float(cols);
        __m256 acc = _mm256_setzero_ps();
        const __m256 muv = _mm256_set1_ps(mu);
        int j = 0;
        for (; j + 8 <= cols; j += 8) {
            const __m256 d = _mm256_sub_ps(_mm256_loadu_ps(xr + j), muv);
            acc = _mm256_fmadd_ps(d, d, acc);
        }
        float var = hsum(acc);
        for (; j < cols; ++j) {
            const float d = xr[j] - mu;
            var += d * d;
        }
        var /= float(cols);
        const float rs = 1.0f / std::sqrt(var + eps);
        mean[r] = mu;
        rstd[r] = rs;
        const __m256 rsv = _mm256_set1_ps(rs);
        for (j = 0; j + 8 <= cols; j += 8) {
            const __m256 xhat = _mm256_mul_ps(_mm256_sub_ps(_mm256_loadu_ps(xr + j), muv), rsv);
            _mm256_storeu_ps(yr + j, _mm256_fmadd_ps(xhat, _mm256_loadu_ps(gamma + j),
                                                     _mm256_loadu_ps(beta + j)));
        }
        for (; j < cols; ++j) yr[j] = (xr[j] - mu) * rs * gamma[j] + beta[j];
    }
}

void layernorm_bwd_impl(int rows, int cols, const float* x, const float* gamma,
                        const float* mean, const float* rstd, const float* dy, float* dx,
                        float* dgamma, float* dbeta) {
    for (int r = 0; r < rows; ++r) {
        const float* xr = x + int64_t(r) * cols;
        const float* dyr = dy + int64_t(r) * cols;
        float* dxr = dx + int64_t(r) * cols;
        const float mu = mean[r];
        const float rs = rstd[r];
        const __m256 muv = _mm256_set1_ps(mu);
        const __m256 rsv = _mm256_set1_ps(rs);
        __m256 s1 = _mm256_setzero_ps(), s2 = _mm256_setzero_ps();
        int j = 0;
        for (; j + 8 <= cols; j += 8) {
            const __m256 xhat = _mm256_mul_ps(_mm256_sub_ps(_mm256_loadu_ps(xr + j), muv), rsv);
            const __m256 dyv = _mm256_loadu_ps(dyr + j);
            const __m256 dxhat = _mm256_mul_ps(dyv, _mm256_loadu_ps(gamma + j));
            s1 = _mm256_add_ps(s1, dxhat);
            s2 = _mm256_fmadd_ps(dxhat, xhat, s2);
            _mm256_storeu_ps(dgamma + j,
                             _mm256_fmadd_ps(dyv, xhat, _mm256_loadu_ps(dgamma + j)));
            _mm256_storeu_ps(dbeta + j, _mm256_add_ps(dyv, _mm256_loadu_ps(dbeta + j)));
        }
        float sum_dxhat = hsum(s1), sum_dxhat_xhat = hsum(s2);
        for (; j < cols; ++j) {
            const float xhat = (xr[j] - mu) * rs;
            const float dxhat = dyr[j] * gamma[j];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
            dgamma[j] += dyr[j] * xhat;
            dbeta[j] += dyr[j];
        }
        const float inv_cols = 1.0f / float(cols);
        const __m256 a1 = _mm256_set1_ps(inv_cols * sum_dxhat);
        const __m256 a2 = _mm256_set1_ps(inv_cols * sum_dxhat_xhat);
        for (j = 0; j + 8 <= cols; j += 8) {
            const __m256 xhat = _mm256_mul_ps(_mm256_sub_ps(_mm256_loadu_ps(xr + j), muv), rsv);
            const __m256 dxhat = _mm256_mul_ps(_mm256_loadu_ps(dyr + j), _mm256_loadu_ps(gamma + j));
            __m256 v = _mm256_sub_ps(_mm256_sub_ps(dxhat, a1), _mm256_mul_ps(xhat, a2));
            _mm256_storeu_ps(dxr + j, _mm256_fmadd_ps(rsv, v, _mm256_loadu_ps(dxr + j)));
        }
        for (; j < cols; ++j) {
            const float xhat = (xr[j] - mu) * rs;
            const float dxhat = dyr[j] * gamma[j];
            dxr[j] += rs * (dxhat - inv_cols * sum_dxhat - xhat * inv_cols * sum_dxhat_xhat);
        }
    }
}

void adamw_impl(int64_t n, float* p, const float* g, float* m, float* v, float lr, float beta1,
                float beta2, float eps, float weight_decay, float bc1, float bc2) {
    const __m256 b1 = _mm256_set1_ps(beta1), ob1 = _mm256_set1_ps(1.0f - beta1);
    const __m256 b2 = _mm256_set1_ps(beta2), ob2 = _mm256_set1_ps(1.0f - beta2);
    const __m256 ibc1 = _mm256_set1_ps(1.0f / bc1), ibc2 = _mm256_set1_ps(1.0f / bc2);
    const __m256 lrv = _mm256_set1_ps(lr), epsv = _mm256_set1_ps(eps);
    const __m256 wdv = _mm256_set1_ps(weight_decay);
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 gv = _mm256_loadu_ps(g + i);
        __m256 mv = _mm256_fmadd_ps(ob1, gv, _mm256_mul_ps(b1, _mm256_loadu_ps(m + i)));
        __m256 vv = _mm256_fmadd_ps(ob2, _mm256_mul_ps(gv, gv),
                                    _mm256_mul_ps(b2, _mm256_loadu_ps(v + i)));
        _mm256_storeu_ps(m + i, mv);
        _mm256_storeu_ps(v + i, vv);
        const __m256 mhat = _mm256_mul_ps(mv, ibc1);
        const __m256 vhat = _mm256_mul_ps(vv, ibc2);
        const __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(vhat), epsv);
        __m256 pv = _mm256_loadu_ps(p + i);
        __m256 upd = _mm256_fmadd_ps(wdv, pv, _mm256_div_ps(mhat, denom));
        _mm256_storeu_ps(p + i, _mm256_fnmadd_ps(lrv, upd, pv));
    }
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0f - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0f - beta2) * g[i] * g[i];
        const float mhat = m[i] / bc1;
        const float vhat = v[i] / bc2;
        p[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * p[i]);
    }
}

}  // namespace

const KernelTable table = {
    gemm_impl,      axpy_impl,       scale_impl,          vadd_impl,          vmul_impl,
    dot_impl,       reduce_sum_impl, reduce_max_impl,     vexp_impl,          softmax_rows_impl,
    gelu_fwd_impl,  gelu_bwd_impl,   layernorm_fwd_impl,  layernorm_bwd_impl, adamw_impl,
};

}  // namespace damt::kern::avx2
