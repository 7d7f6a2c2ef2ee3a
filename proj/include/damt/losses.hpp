#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

#include "damt/autograd.hpp"

namespace damt::loss {

struct LossWeights {
    double lambda1 = 0.2;  // anatomy
    double lambda2 = 1.0;  // morphology
    double lambda3 = 1.0;  // radiomics
    double lambda4 = 1.0;  // rotation
    double lambda5 = 1.0;  // location
    double lambda6 = 1.0;  // mim
    double lambda7 = 1.0;  // contrastive
    double tau = 0.5;
    bool region_sum = false;  // raw-sum variant of the masked regression losses

    double lambda(int k) const {
        switch (k) {
            case 1: return lambda1;
            case 2: return lambda2;
            case 3: return lambda3;
            case 4: return lambda4;
            case 5: return lambda5;
            case 6: return lambda6;
            case 7: return lambda7;
        }
        throw std::invalid_argument("lambda index must be in [1, 7]");
    }
};

struct TaskFlags {
    bool anatomy = true, morphology = true, radiomics = true;
    bool rotation = true, location = true, mim = true, contrastive = true;
};

struct LossReport {
    double anatomy = 0, morpho = 0, radiomics = 0, rot = 0, loc = 0, mim = 0, contrast = 0;
    double total = 0;
    TaskFlags active;
    bool skipped_morpho = false;  // empty active set in every view of the step
    bool skipped_radiomics = false;
};

// total = sum of lambda_k * component over active tasks; inactive contribute 0.
LossReport total_loss(const LossReport& components, const LossWeights& w, const TaskFlags& flags);

// ---- functional forms (value + analytic gradient), templated for the
// float64 finite-difference oracle ----
namespace fn {

template <typename T>
struct ValueGrad {
    T value = T(0);
    std::vector<T> grad;  // d value / d predictions
};

// logits: (voxels, K+1) row-major channel-last; labels in [0, K].
template <typename T>
ValueGrad<T> dice_loss(const std::vector<T>& logits, const std::vector<int>& labels,
                       int num_channels, const std::vector<int>& present, T eps = T(1e-5)) {
    if (present.empty()) throw std::invalid_argument("dice_loss: empty present set");
    const int64_t vox = int64_t(labels.size());
    if (int64_t(logits.size()) != vox * num_channels)
        throw std::invalid_argument("dice_loss: logits/labels shape mismatch");
    for (int r : present)
        if (r < 1 || r >= num_channels)
            throw std::invalid_argument("dice_loss: present region out of range");

    std::vector<T> prob(logits.size());
    for (int64_t v = 0; v < vox; ++v) {
        const T* lr = logits.data() + v * num_channels;
        T* pr = prob.data() + v * num_channels;
        T mx = lr[0];
        for (int c = 1; c < num_channels; ++c) mx = std::max(mx, lr[c]);
        T sum = T(0);
        for (int c = 0; c < num_channels; ++c) {
            pr[c] = std::exp(lr[c] - mx);
            sum += pr[c];
        }
        for (int c = 0; c < num_channels; ++c) pr[c] /= sum;
    }

    ValueGrad<T> out;
    out.grad.assign(logits.size(), T(0));
    std::vector<T> dprob(logits.size(), T(0));
    T mean_dice = T(0);
    const T inv_r = T(1) / T(present.size());
    for (int r : present) {
        T inter = T(0), psum = T(0), gsum = T(0);
        for (int64_t v = 0; v < vox; ++v) {
            const T p = prob[size_t(v * num_channels + r)];
            psum += p;
            if (labels[size_t(v)] == r) {
                inter += p;
                gsum += T(1);
            }
        }
        const T num = T(2) * inter + eps;
        const T den = psum + gsum + eps;
        mean_dice += inv_r * num / den;
        // d dice_r / d p_r(v) = (2*g - num/den) / den
        for (int64_t v = 0; v < vox; ++v) {
            const T g = labels[size_t(v)] == r ? T(1) : T(0);
            dprob[size_t(v * num_channels + r)] += -inv_r * (T(2) * g - num / den) / den;
        }
    }
    out.value = T(1) - mean_dice;

    // softmax backward per voxel
    for (int64_t v = 0; v < vox; ++v) {
        const T* pr = prob.data() + v * num_channels;
        const T* dp = dprob.data() + v * num_channels;
        T dot = T(0);
        for (int c = 0; c < num_channels; ++c) dot += dp[c] * pr[c];
        T* gr = out.grad.data() + v * num_channels;
        for (int c = 0; c < num_channels; ++c) gr[c] = pr[c] * (dp[c] - dot);
    }
    return out;
}

// mean (or raw sum) of |pred - target| over the active index set
template <typename T>
ValueGrad<T> masked_l1(const std::vector<T>& pred, const std::vector<T>& target,
                       const std::vector<int>& active, bool region_sum = false) {
    if (active.empty()) throw std::invalid_argument("masked_l1: empty active set");
    if (pred.size() != target.size()) throw std::invalid_argument("masked_l1: size mismatch");
    ValueGrad<T> out;
    out.grad.assign(pred.size(), T(0));
    const T scale = region_sum ? T(1) : T(1) / T(active.size());
    for (int i : active) {
        const T d = pred[size_t(i)] - target[size_t(i)];
        out.value += scale * std::abs(d);
        out.grad[size_t(i)] = scale * (d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0)));
    }
    return out;
}

template <typename T>
ValueGrad<T> cross_entropy(const std::vector<T>& logits, int target) {
    if (target < 0 || target >= int(logits.size()))
        throw std::invalid_argument("cross_entropy: target class out of range");
    T mx = logits[0];
    for (T v : logits) mx = std::max(mx, v);
    T sum = T(0);
    ValueGrad<T> out;
    out.grad.assign(logits.size(), T(0));
    for (size_t c = 0; c < logits.size(); ++c) {
        out.grad[c] = std::exp(logits[c] - mx);
        sum += out.grad[c];
    }
    out.value = std::log(sum) - (logits[size_t(target)] - mx);
    for (size_t c = 0; c < logits.size(); ++c) out.grad[c] /= sum;
    out.grad[size_t(target)] -= T(1);
    return out;
}

// L1 averaged over masked voxels only (mask: 1 = masked)
template <typename T>
ValueGrad<T> mim_l1(const std::vector<T>& recon, const std::vector<T>& original,
                    const std::vector<uint8_t>& mask) {
    if (recon.size() != original.size() || recon.size() != mask.size())
        throw std::invalid_argument("mim_l1: size mismatch");
    int64_t n = 0;
    for (uint8_t m : mask) n += m;
    if (n == 0) throw std::invalid_argument("mim_l1: empty mask");
    ValueGrad<T> out;
    out.grad.assign(recon.size(), T(0));
    const T scale = T(1) / T(n);
    for (size_t i = 0; i < recon.size(); ++i) {
        if (!mask[i]) continue;
        const T d = recon[i] - original[i];
        out.value += scale * std::abs(d);
        out.grad[i] = scale * (d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0)));
    }
    return out;
}

// z: 2N unit vectors (row-major), partner[i] = index of the positive pair.
// loss = mean_i -log( exp(s_ij/tau) / sum_{k != i} exp(s_ik/tau) )
template <typename T>
ValueGrad<T> ntxent(const std::vector<T>& z, int64_t n_vec, int64_t dim,
                    const std::vector<int>& partner, T tau) {
    if (n_vec < 4) throw std::invalid_argument("ntxent: need at least 2 pairs");
    if (int64_t(partner.size()) != n_vec) throw std::invalid_argument("ntxent: partner map size");
    std::vector<T> sims(size_t(n_vec * n_vec), T(0));
    for (int64_t i = 0; i < n_vec; ++i)
        for (int64_t j = 0; j < n_vec; ++j) {
            T s = T(0);
            for (int64_t d = 0; d < dim; ++d) s += z[size_t(i * dim + d)] * z[size_t(j * dim + d)];
            sims[size_t(i * n_vec + j)] = s;
        }

    ValueGrad<T> out;
    out.grad.assign(z.size(), T(0));
    std::vector<T> coeff(size_t(n_vec * n_vec), T(0));  // d loss / d s_ik
    const T inv_n = T(1) / T(n_vec);
    for (int64_t i = 0; i < n_vec; ++i) {
        T mx = -std::numeric_limits<T>::infinity();
        for (int64_t k = 0; k < n_vec; ++k)
            if (k != i) mx = std::max(mx, sims[size_t(i * n_vec + k)] / tau);
        T denom = T(0);
        for (int64_t k = 0; k < n_vec; ++k)
            if (k != i) denom += std::exp(sims[size_t(i * n_vec + k)] / tau - mx);
        const int64_t j = partner[size_t(i)];
        out.value += inv_n * (-(sims[size_t(i * n_vec + j)] / tau - mx) + std::log(denom));
        for (int64_t k = 0; k < n_vec; ++k) {
            if (k == i) continue;
            const T soft = std::exp(sims[size_t(i * n_vec + k)] / tau - mx) / denom;
            coeff[size_t(i * n_vec + k)] = inv_n * (soft - (k == j ? T(1) : T(0))) / tau;
        }
    }
    for (int64_t i = 0; i < n_vec; ++i)
        for (int64_t k = 0; k < n_vec; ++k) {
            const T c = coeff[size_t(i * n_vec + k)];
            if (c == T(0)) continue;
            for (int64_t d = 0; d < dim; ++d) {
                out.grad[size_t(i * dim + d)] += c * z[size_t(k * dim + d)];
                out.grad[size_t(k * dim + d)] += c * z[size_t(i * dim + d)];
            }
        }
    return out;
}

}  // namespace fn

// ---- autograd wrappers (float path used in training) ----

Node* dice_loss(Tape& t, Node* logits, std::shared_ptr<const std::vector<int>> labels,
                std::shared_ptr<const std::vector<int>> present, float eps = 1e-5f);
Node* masked_l1(Tape& t, Node* pred, std::shared_ptr<const std::vector<float>> target,
                std::shared_ptr<const std::vector<int>> active, bool region_sum = false);
Node* cross_entropy(Tape& t, Node* logits, int target);
Node* mim_l1(Tape& t, Node* recon, std::shared_ptr<const std::vector<float>> original,
             std::shared_ptr<const std::vector<uint8_t>> mask);
Node* ntxent(Tape& t, const std::vector<Node*>& zs, const std::vector<int>& partner, float tau);

}  // namespace damt::loss
