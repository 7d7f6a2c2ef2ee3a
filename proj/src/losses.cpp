#include "damt/losses.hpp"

#include "damt/kern/kernels.hpp"

namespace damt::loss {

LossReport total_loss(const LossReport& c, const LossWeights& w, const TaskFlags& flags) {
    for (int k = 1; k <= 7; ++k)
        if (w.lambda(k) < 0) throw std::invalid_argument("total_loss: negative weight");
    LossReport r = c;
    r.active = flags;
    if (!flags.anatomy) r.anatomy = 0;
    if (!flags.morphology) r.morpho = 0;
    if (!flags.radiomics) r.radiomics = 0;
    if (!flags.rotation) r.rot = 0;
    if (!flags.location) r.loc = 0;
    if (!flags.mim) r.mim = 0;
    if (!flags.contrastive) r.contrast = 0;
    r.total = w.lambda1 * r.anatomy + w.lambda2 * r.morpho + w.lambda3 * r.radiomics +
              w.lambda4 * r.rot + w.lambda5 * r.loc + w.lambda6 * r.mim + w.lambda7 * r.contrast;
    return r;
}

namespace {

// scalar loss node whose gradient w.r.t. one parent is precomputed
Node* grad_node(Tape& t, float value, Node* parent, std::vector<float> grad) {
    auto g = std::make_shared<std::vector<float>>(std::move(grad));
    return t.make(Tensor::scalar(value), {parent}, [parent, g](Node& n) {
        if (parent->requires_grad)
            kern::axpy(int64_t(g->size()), n.grad.data[0], g->data(), parent->gptr());
    });
}

}  // namespace

Node* dice_loss(Tape& t, Node* logits, std::shared_ptr<const std::vector<int>> labels,
                std::shared_ptr<const std::vector<int>> present, float eps) {
    const int channels = int(logits->val.last_dim());
    std::vector<float> flat(logits->val.data.begin(), logits->val.data.end());
    auto vg = fn::dice_loss<float>(flat, *labels, channels, *present, eps);
    return grad_node(t, vg.value, logits, std::move(vg.grad));
}

Node* masked_l1(Tape& t, Node* pred, std::shared_ptr<const std::vector<float>> target,
                std::shared_ptr<const std::vector<int>> active, bool region_sum) {
    auto vg = fn::masked_l1<float>(pred->val.data, *target, *active, region_sum);
    return grad_node(t, vg.value, pred, std::move(vg.grad));
}

Node* cross_entropy(Tape& t, Node* logits, int target) {
    auto vg = fn::cross_entropy<float>(logits->val.data, target);
    return grad_node(t, vg.value, logits, std::move(vg.grad));
}

Node* mim_l1(Tape& t, Node* recon, std::shared_ptr<const std::vector<float>> original,
             std::shared_ptr<const std::vector<uint8_t>> mask) {
    auto vg = fn::mim_l1<float>(recon->val.data, *original, *mask);
    return grad_node(t, vg.value, recon, std::move(vg.grad));
}

Node* ntxent(Tape& t, const std::vector<Node*>& zs, const std::vector<int>& partner, float tau) {
    const int64_t n_vec = int64_t(zs.size());
    if (n_vec < 4) throw std::invalid_argument("ntxent: need at least 2 pairs (batch >= 2)");
    const int64_t dim = zs[0]->val.numel();
    std::vector<float> z(size_t(n_vec * dim));
    for (int64_t i = 0; i < n_vec; ++i)
        std::copy(zs[size_t(i)]->val.data.begin(), zs[size_t(i)]->val.data.end(),
                  z.begin() + i * dim);
    auto vg = fn::ntxent<float>(z, n_vec, dim, partner, tau);
    auto g = std::make_shared<std::vector<float>>(std::move(vg.grad));
    std::vector<Node*> parents(zs.begin(), zs.end());
    return t.make(Tensor::scalar(vg.value), parents, [parents, g, dim](Node& n) {
        const float gr = n.grad.data[0];
        for (size_t i = 0; i < parents.size(); ++i)
            if (parents[i]->requires_grad)
                kern::axpy(dim, gr, g->data() + int64_t(i) * dim, parents[i]->gptr());
    });
}

}  // namespace damt::loss
