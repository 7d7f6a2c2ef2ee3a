// Reference kernels: straightforward loops, used both as the portable
// fallback and as the equivalence oracle for the SIMD variants.

#include <cmath>
#include <cstdint>

#include "damt/kern/kernels.hpp"

namespace damt::kern::scalar {

namespace {

inline float at(const float* m, int ld, bool trans, int r, int c) {
    return trans ? m[int64_t(c) * ld + r] : m[int64_t(r) * ld + c];
}

void gemm_impl(int m, int n, int k, float alpha, const float* a, int lda, bool trans_a,
               const float* b, int ldb, bool trans_b, float beta, float* c, int ldc) {
    for (int i = 0; i < m; ++i) {
        float* crow = c + int64_t(i) * ldc;
        if (beta == 0.0f) {
            for (int j = 0; j < n; ++j) crow[j] = 0.0f;
        } else if (beta != 1.0f) {
            for (int j = 0; j < n; ++j) crow[j] *= beta;
        }
        for (int p = 0; p < k; ++p) {
            const float av = alpha * at(a, lda, trans_a, i, p);
            if (av == 0.0f) continue;
            if (!trans_b) {
                const float* brow = b + int64_t(p) * ldb;
                for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
            } else {
                for (int j = 0; j < n; ++j) crow[j] += av * b[int64_t(j) * ldb + p];
            }
        }
    }
}

void axpy_impl(int64_t n, float a, const float* x, float* y) {
    for (int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_impl(int64_t n, float a, float* x) {
    for (int64_t i = 0; i < n; ++i) x[i] *= a;
}

void vadd_impl(int64_t n, const float* a, const float* b, float* out) {
    for (int64_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void vmul_impl(int64_t n, const float* a, const float* b, float* out) {
    for (int64_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

float dot_impl(int64_t n, const float* a, const float* b) {
    float s = 0.0f;
    for (int64_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

float reduce_sum_impl(int64_t n, const float* x) {
    float s = 0.0f;
    for (int64_t i = 0; i < n; ++i) s += x[i];
    return s;
}

float reduce_max_impl(int64_t n, const float* x) {
    float m = x[0];
    for (int64_t i = 1; i < n; ++i) m = x[i] > m ? x[i] : m;
    return m;
}

void vexp_impl(int64_t n, const float* x, float* y) {
    for (int64_t i = 0; i < n; ++i) y[i] = std::exp(x[i]);
}

void softmax_rows_impl(int rows, int cols, const float* x, float* y) {
    for (int r = 0; r < rows; ++r) {
        const float* xr = x + int64_t(r) * cols;
        float* yr = y + int64_t(r) * cols;
        float m = reduce_max_impl(cols, xr);
        float s = 0.0f;
        for (int j = 0; j < cols; ++j) {
            yr[j] = std::exp(xr[j] - m);
            s += yr[j];
        }
        const float inv = 1.0f / s;
        for (int j = 0; j < cols; ++j) yr[j] *= inv;
    }
}

constexpr float kGeluC = 0.7978845608028654f;  // sqrt(2/pi)
constexpr float kGeluA = 0.044715f;

void gelu_fwd_impl(int64_t n, const float* x, float* y) {
    for (int64_t i = 0; i < n; ++i) {
        const float v = x[i];
        const float u = kGeluC * (v + kGeluA * v * v * v);
        y[i] = 0.5f * v * (1.0f + std::tanh(u));
    }
}

void gelu_bwd_impl(int64_t n, const float* x, const float* dy, float* dx) {
    for (int64_t i = 0; i < n; ++i) {
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
        float mu = 0.0f;
        for (int j = 0; j < cols; ++j) mu += xr[j];
        mu /= float(cols);
        float var = 0.0f;
        for (int j = 0; j < cols; ++j) {
            const float d = xr[j] - mu;
            var += d * d;
        }
        var /= float(cols);
        const float rs = 1.0f / std::sqrt(var + eps);
        mean[r] = mu;
        rstd[r] = rs;
        for (int j = 0; j < cols; ++j) yr[j] = (xr[j] - mu) * rs * gamma[j] + beta[j];
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
        float sum_dxhat = 0.0f, sum_dxhat_xhat = 0.0f;
        for (int j = 0; j < cols; ++j) {
            const float xhat = (xr[j] - mu) * rs;
            const float dxhat = dyr[j] * gamma[j];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
            dgamma[j] += dyr[j] * xhat;
            dbeta[j] += dyr[j];
        }
        const float inv_cols = 1.0f / float(cols);
        for (int j = 0; j < cols; ++j) {
            const float xhat = (xr[j] - mu) * rs;
            const float dxhat = dyr[j] * gamma[j];
            dxr[j] += rs * (dxhat - inv_cols * sum_dxhat - xhat * inv_cols * sum_dxhat_xhat);
        }
    }
}

void adamw_impl(int64_t n, float* p, const float* g, float* m, float* v, float lr, float beta1,
                float beta2, float eps, float weight_decay, float bc1, float bc2) {
    for (int64_t i = 0; i < n; ++i) {
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

}  // namespace damt::kern::scalar
