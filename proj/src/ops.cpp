#include "damt/ops.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "damt/kern/kernels.hpp"

namespace damt::ops {

namespace {

void check(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

Node* add(Tape& t, Node* a, Node* b) {
    check(a->val.numel() == b->val.numel(), "add: size mismatch");
    Tensor out(a->val.shape);
    kern::vadd(out.numel(), a->val.ptr(), b->val.ptr(), out.ptr());
    return t.make(std::move(out), {a, b}, [a, b](Node& n) {
        if (a->requires_grad) kern::axpy(n.grad.numel(), 1.0f, n.grad.ptr(), a->gptr());
        if (b->requires_grad) kern::axpy(n.grad.numel(), 1.0f, n.grad.ptr(), b->gptr());
    });
}

Node* scale(Tape& t, Node* x, float s) {
    Tensor out = x->val;
    kern::scale(out.numel(), s, out.ptr());
    return t.make(std::move(out), {x}, [x, s](Node& n) {
        if (x->requires_grad) kern::axpy(n.grad.numel(), s, n.grad.ptr(), x->gptr());
    });
}

Node* mul_mask(Tape& t, Node* x, std::shared_ptr<const Tensor> mask) {
    check(x->val.numel() == mask->numel(), "mul_mask: size mismatch");
    Tensor out(x->val.shape);
    kern::vmul(out.numel(), x->val.ptr(), mask->ptr(), out.ptr());
    return t.make(std::move(out), {x}, [x, mask](Node& n) {
        if (!x->requires_grad) return;
        const int64_t m = n.grad.numel();
        const float* g = n.grad.ptr();
        const float* mk = mask->ptr();
        float* dx = x->gptr();
        for (int64_t i = 0; i < m; ++i) dx[i] += g[i] * mk[i];
    });
}

Node* linear(Tape& t, Node* x, Node* w, Node* b) {
    const int in = int(w->val.dim(0));
    const int out_dim = int(w->val.dim(1));
    check(x->val.numel() % in == 0, "linear: input not divisible by in_dim");
    const int rows = int(x->val.numel() / in);

    std::vector<int64_t> out_shape = x->val.shape;
    out_shape.back() = out_dim;
    Tensor out(out_shape);
    kern::matmul(rows, out_dim, in, x->val.ptr(), false, w->val.ptr(), false, out.ptr());
    if (b) {
        check(b->val.numel() == out_dim, "linear: bias size mismatch");
        for (int r = 0; r < rows; ++r)
            kern::axpy(out_dim, 1.0f, b->val.ptr(), out.ptr() + int64_t(r) * out_dim);
    }

    return t.make(std::move(out), b ? std::vector<Node*>{x, w, b} : std::vector<Node*>{x, w},
                  [x, w, b, rows, in, out_dim](Node& n) {
                      const float* dy = n.grad.ptr();
                      if (x->requires_grad)
                          kern::matmul(rows, in, out_dim, dy, false, w->val.ptr(), true,
                                       x->gptr(), 1.0f);
                      if (w->requires_grad)
                          kern::matmul(in, out_dim, rows, x->val.ptr(), true, dy, false,
                                       w->gptr(), 1.0f);
                      if (b && b->requires_grad) {
                          float* db = b->gptr();
                          for (int r = 0; r < rows; ++r)
                              kern::axpy(out_dim, 1.0f, dy + int64_t(r) * out_dim, db);
                      }
                  });
}

Node* layernorm(Tape& t, Node* x, Node* gamma, Node* beta, float eps) {
    const int cols = int(gamma->val.numel());
    check(x->val.numel() % cols == 0, "layernorm: size mismatch");
    const int rows = int(x->val.numel() / cols);
    Tensor out(x->val.shape);
    auto mean = std::make_shared<Tensor>(std::vector<int64_t>{rows});
    auto rstd = std::make_shared<Tensor>(std::vector<int64_t>{rows});
    kern::layernorm_fwd(rows, cols, x->val.ptr(), gamma->val.ptr(), beta->val.ptr(), eps,
                        out.ptr(), mean->ptr(), rstd->ptr());
    return t.make(std::move(out), {x, gamma, beta}, [=](Node& n) {
        // gamma/beta grads are always accumulated alongside dx
        kern::layernorm_bwd(rows, cols, x->val.ptr(), gamma->val.ptr(), mean->ptr(),
                            rstd->ptr(), n.grad.ptr(), x->gptr(), gamma->gptr(), beta->gptr());
    });
}

Node* gelu(Tape& t, Node* x) {
    Tensor out(x->val.shape);
    kern::gelu_fwd(out.numel(), x->val.ptr(), out.ptr());
    return t.make(std::move(out), {x}, [x](Node& n) {
        if (!x->requires_grad) return;
        Tensor dx(n.grad.shape);
        kern::gelu_bwd(n.grad.numel(), x->val.ptr(), n.grad.ptr(), dx.ptr());
        kern::axpy(dx.numel(), 1.0f, dx.ptr(), x->gptr());
    });
}

Node* gather(Tape& t, Node* x, IndexMap idx, std::vector<int64_t> out_shape) {
    check(int64_t(idx->size()) == Tensor::numel_of(out_shape), "gather: index/shape mismatch");
    Tensor out(out_shape);
    const float* src = x->val.ptr();
    float* dst = out.ptr();
    const int64_t n = out.numel();
    const int32_t* ix = idx->data();
    for (int64_t i = 0; i < n; ++i) dst[i] = ix[i] >= 0 ? src[ix[i]] : 0.0f;
    return t.make(std::move(out), {x}, [x, idx](Node& n2) {
        if (!x->requires_grad) return;
        float* dx = x->gptr();
        const float* g = n2.grad.ptr();
        const int32_t* ix = idx->data();
        const int64_t m = n2.grad.numel();
        for (int64_t i = 0; i < m; ++i)
            if (ix[i] >= 0) dx[ix[i]] += g[i];
    });
}

Node* concat_last(Tape& t, Node* a, Node* b) {
    const int64_t ca = a->val.last_dim(), cb = b->val.last_dim();
    const int64_t rows = a->val.rows();
    check(b->val.rows() == rows, "concat_last: row mismatch");
    std::vector<int64_t> shape = a->val.shape;
    shape.back() = ca + cb;
    Tensor out(shape);
    for (int64_t r = 0; r < rows; ++r) {
        std::memcpy(out.ptr() + r * (ca + cb), a->val.ptr() + r * ca, size_t(ca) * 4);
        std::memcpy(out.ptr() + r * (ca + cb) + ca, b->val.ptr() + r * cb, size_t(cb) * 4);
    }
    return t.make(std::move(out), {a, b}, [a, b, ca, cb, rows](Node& n) {
        const float* g = n.grad.ptr();
        for (int64_t r = 0; r < rows; ++r) {
            if (a->requires_grad) kern::axpy(ca, 1.0f, g + r * (ca + cb), a->gptr() + r * ca);
            if (b->requires_grad) kern::axpy(cb, 1.0f, g + r * (ca + cb) + ca, b->gptr() + r * cb);
        }
    });
}

Node* mean_rows(Tape& t, Node* x) {
    const int64_t cols = x->val.last_dim();
    const int64_t rows = x->val.rows();
    Tensor out({cols});
    for (int64_t r = 0; r < rows; ++r)
        kern::axpy(cols, 1.0f / float(rows), x->val.ptr() + r * cols, out.ptr());
    return t.make(std::move(out), {x}, [x, rows, cols](Node& n) {
        if (!x->requires_grad) return;
        for (int64_t r = 0; r < rows; ++r)
            kern::axpy(cols, 1.0f / float(rows), n.grad.ptr(), x->gptr() + r * cols);
    });
}

Node* l2_normalize_rows(Tape& t, Node* x, bool* degenerate_flag) {
    const int64_t cols = x->val.last_dim();
    const int64_t rows = x->val.rows();
    Tensor out(x->val.shape);
    auto norms = std::make_shared<std::vector<float>>(rows);
    for (int64_t r = 0; r < rows; ++r) {
        const float* xr = x->val.ptr() + r * cols;
        float nrm = std::sqrt(kern::dot(cols, xr, xr));
        if (nrm < 1e-12f) {
            // degenerate: emit a fixed basis vector, gradient treated as zero
            if (degenerate_flag) *degenerate_flag = true;
            (*norms)[r] = 0.0f;
            out.ptr()[r * cols] = 1.0f;
            continue;
        }
        (*norms)[r] = nrm;
        float* yr = out.ptr() + r * cols;
        for (int64_t c = 0; c < cols; ++c) yr[c] = xr[c] / nrm;
    }
    return t.make(std::move(out), {x}, [x, norms, rows, cols](Node& n) {
        if (!x->requires_grad) return;
        for (int64_t r = 0; r < rows; ++r) {
            const float nrm = (*norms)[r];
            if (nrm == 0.0f) continue;
            const float* xr = x->val.ptr() + r * cols;
            const float* gr = n.grad.ptr() + r * cols;
            float* dxr = x->gptr() + r * cols;
            const float xg = kern::dot(cols, xr, gr);
            const float inv = 1.0f / nrm;
            const float inv3 = inv * inv * inv;
            for (int64_t c = 0; c < cols; ++c) dxr[c] += gr[c] * inv - xr[c] * xg * inv3;
        }
    });
}

Node* sum_all(Tape& t, Node* x) {
    Tensor out = Tensor::scalar(kern::reduce_sum(x->val.numel(), x->val.ptr()));
    return t.make(std::move(out), {x}, [x](Node& n) {
        if (!x->requires_grad) return;
        const float g = n.grad.data[0];
        float* dx = x->gptr();
        const int64_t m = x->val.numel();
        for (int64_t i = 0; i < m; ++i) dx[i] += g;
    });
}

Node* weighted_sum_scalars(Tape& t, const std::vector<Node*>& scalars,
                           const std::vector<float>& weights) {
    check(scalars.size() == weights.size(), "weighted_sum_scalars: size mismatch");
    float total = 0.0f;
    for (size_t i = 0; i < scalars.size(); ++i) total += weights[i] * scalars[i]->val.data[0];
    auto ws = std::make_shared<std::vector<float>>(weights);
    std::vector<Node*> parents(scalars.begin(), scalars.end());
    return t.make(Tensor::scalar(total), parents, [parents, ws](Node& n) {
        const float g = n.grad.data[0];
        for (size_t i = 0; i < parents.size(); ++i)
            if (parents[i]->requires_grad) parents[i]->gptr()[0] += g * (*ws)[i];
    });
}

// ---- conv3d ----

namespace {

// One z-slab of im2col: rows are the H*W voxels of plane z, columns the
// 27*Ci tap values (zero outside the volume).
void im2col_slab(const float* x, int D, int H, int W, int Ci, int z, float* col) {
    const int64_t plane = int64_t(H) * W;
    for (int y = 0; y < H; ++y) {
        for (int xx = 0; xx < W; ++xx) {
            float* row = col + (int64_t(y) * W + xx) * 27 * Ci;
            int tap = 0;
            for (int dz = -1; dz <= 1; ++dz) {
                const int zz = z + dz;
                for (int dy = -1; dy <= 1; ++dy) {
                    const int yy = y + dy;
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int xw = xx + dx;
                        float* dst = row + int64_t(tap) * Ci;
                        if (zz < 0 || zz >= D || yy < 0 || yy >= H || xw < 0 || xw >= W) {
                            std::memset(dst, 0, size_t(Ci) * 4);
                        } else {
                            std::memcpy(dst, x + ((int64_t(zz) * H + yy) * W + xw) * Ci,
                                        size_t(Ci) * 4);
                        }
                        ++tap;
                    }
                }
            }
        }
    }
    (void)plane;
}

void col2im_slab(const float* col, int D, int H, int W, int Ci, int z, float* dx) {
    for (int y = 0; y < H; ++y) {
        for (int xx = 0; xx < W; ++xx) {
            const float* row = col + (int64_t(y) * W + xx) * 27 * Ci;
            int tap = 0;
            for (int dz = -1; dz <= 1; ++dz) {
                const int zz = z + dz;
                for (int dy = -1; dy <= 1; ++dy) {
                    const int yy = y + dy;
                    for (int dx2 = -1; dx2 <= 1; ++dx2) {
                        const int xw = xx + dx2;
                        if (zz >= 0 && zz < D && yy >= 0 && yy < H && xw >= 0 && xw < W) {
                            kern::axpy(Ci, 1.0f, row + int64_t(tap) * Ci,
                                       dx + ((int64_t(zz) * H + yy) * W + xw) * Ci);
                        }
                        ++tap;
                    }
                }
            }
        }
    }
}

}  // namespace

Node* conv3d(Tape& t, Node* x, Node* w, Node* b) {
    check(x->val.ndim() == 4, "conv3d: expects (D,H,W,C)");
    const int D = int(x->val.dim(0)), H = int(x->val.dim(1)), W = int(x->val.dim(2));
    const int Ci = int(x->val.dim(3));
    check(w->val.dim(0) == 27 * Ci, "conv3d: weight in_dim mismatch");
    const int Co = int(w->val.dim(1));
    const int rows = H * W;

    Tensor out({D, H, W, Co});
    std::vector<float> col(size_t(rows) * 27 * Ci);
    for (int z = 0; z < D; ++z) {
        im2col_slab(x->val.ptr(), D, H, W, Ci, z, col.data());
        float* yz = out.ptr() + int64_t(z) * rows * Co;
        kern::matmul(rows, Co, 27 * Ci, col.data(), false, w->val.ptr(), false, yz);
        if (b)
            for (int r = 0; r < rows; ++r)
                kern::axpy(Co, 1.0f, b->val.ptr(), yz + int64_t(r) * Co);
    }

    return t.make(std::move(out),
                  b ? std::vector<Node*>{x, w, b} : std::vector<Node*>{x, w},
                  [x, w, b, D, H, W, Ci, Co, rows](Node& n) {
                      std::vector<float> col(size_t(rows) * 27 * Ci);
                      std::vector<float> dcol(size_t(rows) * 27 * Ci);
                      for (int z = 0; z < D; ++z) {
                          const float* dyz = n.grad.ptr() + int64_t(z) * rows * Co;
                          if (w->requires_grad) {
                              im2col_slab(x->val.ptr(), D, H, W, Ci, z, col.data());
                              kern::matmul(27 * Ci, Co, rows, col.data(), true, dyz, false,
                                           w->gptr(), 1.0f);
                          }
                          if (x->requires_grad) {
                              kern::matmul(rows, 27 * Ci, Co, dyz, false, w->val.ptr(), true,
                                           dcol.data());
                              col2im_slab(dcol.data(), D, H, W, Ci, z, x->gptr());
                          }
                          if (b && b->requires_grad)
                              for (int r = 0; r < rows; ++r)
                                  kern::axpy(Co, 1.0f, dyz + int64_t(r) * Co, b->gptr());
                      }
                  });
}

// ---- window attention ----

Node* window_attention(Tape& t, Node* xw, Node* wqkv, Node* bqkv, Node* wproj, Node* bproj,
                       Node* bias_table, IndexMap bias_idx, const AttentionMask& mask,
                       int num_heads) {
    check(xw->val.ndim() == 3, "window_attention: expects (nW, T, C)");
    const int nw = int(xw->val.dim(0));
    const int tk = int(xw->val.dim(1));
    const int ch = int(xw->val.dim(2));
    check(ch % num_heads == 0, "window_attention: heads must divide channels");
    const int hd = ch / num_heads;
    const float att_scale = 1.0f / std::sqrt(float(hd));
    const int rows = nw * tk;
    check(int(bias_idx->size()) == tk * tk, "window_attention: bias index size");

    // qkv projection over all windows at once
    auto qkv = std::make_shared<Tensor>(std::vector<int64_t>{rows, 3 * ch});
    kern::matmul(rows, 3 * ch, ch, xw->val.ptr(), false, wqkv->val.ptr(), false, qkv->ptr());
    for (int r = 0; r < rows; ++r)
        kern::axpy(3 * ch, 1.0f, bqkv->val.ptr(), qkv->ptr() + int64_t(r) * 3 * ch);

    auto attn_out = std::make_shared<Tensor>(std::vector<int64_t>{rows, ch});
    {
        std::vector<float> s(size_t(tk) * tk);
        const float* bt = bias_table->val.ptr();
        const int32_t* bi = bias_idx->data();
        for (int w = 0; w < nw; ++w) {
            const float* mb = nullptr;
            if (mask.window_type && (*mask.window_type)[w] >= 0 && mask.bank)
                mb = mask.bank->data() + int64_t((*mask.window_type)[w]) * tk * tk;
            for (int h = 0; h < num_heads; ++h) {
                const float* q = qkv->ptr() + int64_t(w) * tk * 3 * ch + h * hd;
                const float* k = q + ch;
                const float* v = q + 2 * ch;
                kern::gemm(tk, tk, hd, att_scale, q, 3 * ch, false, k, 3 * ch, true, 0.0f,
                           s.data(), tk);
                for (int i = 0; i < tk * tk; ++i) s[i] += bt[int64_t(bi[i]) * num_heads + h];
                if (mb)
                    for (int i = 0; i < tk * tk; ++i) s[i] += mb[i];
                kern::softmax_rows(tk, tk, s.data(), s.data());
                kern::gemm(tk, hd, tk, 1.0f, s.data(), tk, false, v, 3 * ch, false, 0.0f,
                           attn_out->ptr() + int64_t(w) * tk * ch + h * hd, ch);
            }
        }
    }

    // output projection
    Tensor out(xw->val.shape);
    kern::matmul(rows, ch, ch, attn_out->ptr(), false, wproj->val.ptr(), false, out.ptr());
    for (int r = 0; r < rows; ++r)
        kern::axpy(ch, 1.0f, bproj->val.ptr(), out.ptr() + int64_t(r) * ch);

    std::vector<Node*> parents{xw, wqkv, bqkv, wproj, bproj, bias_table};
    return t.make(std::move(out), parents, [=](Node& n) {
        const float* dy = n.grad.ptr();

        // proj backward
        Tensor dattn({rows, ch});
        kern::matmul(rows, ch, ch, dy, false, wproj->val.ptr(), true, dattn.ptr());
        if (wproj->requires_grad)
            kern::matmul(ch, ch, rows, attn_out->ptr(), true, dy, false, wproj->gptr(), 1.0f);
        if (bproj->requires_grad)
            for (int r = 0; r < rows; ++r)
                kern::axpy(ch, 1.0f, dy + int64_t(r) * ch, bproj->gptr());

        // attention backward with recomputed probabilities
        Tensor dqkv({rows, 3 * ch});
        std::vector<float> s(size_t(tk) * tk), p(size_t(tk) * tk), dp(size_t(tk) * tk);
        const float* bt = bias_table->val.ptr();
        const int32_t* bi = bias_idx->data();
        float* dbt = bias_table->requires_grad ? bias_table->gptr() : nullptr;
        for (int w = 0; w < nw; ++w) {
            const float* mb = nullptr;
            if (mask.window_type && (*mask.window_type)[w] >= 0 && mask.bank)
                mb = mask.bank->data() + int64_t((*mask.window_type)[w]) * tk * tk;
            for (int h = 0; h < num_heads; ++h) {
                const float* q = qkv->ptr() + int64_t(w) * tk * 3 * ch + h * hd;
                const float* k = q + ch;
                const float* v = q + 2 * ch;
                kern::gemm(tk, tk, hd, att_scale, q, 3 * ch, false, k, 3 * ch, true, 0.0f,
                           s.data(), tk);
                for (int i = 0; i < tk * tk; ++i) s[i] += bt[int64_t(bi[i]) * num_heads + h];
                if (mb)
                    for (int i = 0; i < tk * tk; ++i) s[i] += mb[i];
                kern::softmax_rows(tk, tk, s.data(), p.data());

                const float* dout = dattn.ptr() + int64_t(w) * tk * ch + h * hd;
                float* dq = dqkv.ptr() + int64_t(w) * tk * 3 * ch + h * hd;
                float* dk = dq + ch;
                float* dv = dq + 2 * ch;

                // dV = P^T dOut
                kern::gemm(tk, hd, tk, 1.0f, p.data(), tk, true, dout, ch, false, 0.0f, dv,
                           3 * ch);
                // dP = dOut V^T
                kern::gemm(tk, tk, hd, 1.0f, dout, ch, false, v, 3 * ch, true, 0.0f, dp.data(),
                           tk);
                // dS = P * (dP - rowsum(dP * P))
                for (int i = 0; i < tk; ++i) {
                    float* pi = p.data() + int64_t(i) * tk;
                    float* dpi = dp.data() + int64_t(i) * tk;
                    float rs = 0.0f;
                    for (int j = 0; j < tk; ++j) rs += dpi[j] * pi[j];
                    for (int j = 0; j < tk; ++j) dpi[j] = pi[j] * (dpi[j] - rs);
                }
                if (dbt)
                    for (int i = 0; i < tk * tk; ++i)
                        dbt[int64_t(bi[i]) * num_heads + h] += dp[i];
                // dQ = dS K * scale ; dK = dS^T Q * scale
                kern::gemm(tk, hd, tk, att_scale, dp.data(), tk, false, k, 3 * ch, false, 0.0f,
                           dq, 3 * ch);
                kern::gemm(tk, hd, tk, att_scale, dp.data(), tk, true, q, 3 * ch, false, 0.0f,
                           dk, 3 * ch);
            }
        }

        // qkv linear backward
        if (xw->requires_grad)
            kern::matmul(rows, ch, 3 * ch, dqkv.ptr(), false, wqkv->val.ptr(), true, xw->gptr(),
                         1.0f);
        if (wqkv->requires_grad)
            kern::matmul(ch, 3 * ch, rows, xw->val.ptr(), true, dqkv.ptr(), false, wqkv->gptr(),
                         1.0f);
        if (bqkv->requires_grad)
            for (int r = 0; r < rows; ++r)
                kern::axpy(3 * ch, 1.0f, dqkv.ptr() + int64_t(r) * 3 * ch, bqkv->gptr());
    });
}

}  // namespace damt::ops
