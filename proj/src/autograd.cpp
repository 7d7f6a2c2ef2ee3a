#include "damt/autograd.hpp"

#include <cmath>
#include <stdexcept>

#include "damt/kern/kernels.hpp"

namespace damt {

Param& ParamStore::create(const std::string& name, std::vector<int64_t> shape) {
    if (index_.count(name)) throw std::invalid_argument("duplicate param name: " + name);
    // vector growth invalidates references; keep capacity generous
    if (params_.capacity() == params_.size()) params_.reserve(params_.size() * 2 + 64);
    index_[name] = params_.size();
    params_.push_back(Param{name, Tensor(std::move(shape)), Tensor()});
    return params_.back();
}

Param& ParamStore::at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("unknown param: " + name);
    return params_[it->second];
}

const Param& ParamStore::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("unknown param: " + name);
    return params_[it->second];
}

bool ParamStore::contains(const std::string& name) const { return index_.count(name) != 0; }

int64_t ParamStore::total_params() const {
    int64_t n = 0;
    for (const auto& p : params_) n += p.value.numel();
    return n;
}

int64_t ParamStore::total_params_with_prefix(const std::string& prefix) const {
    int64_t n = 0;
    for (const auto& p : params_)
        if (p.name.rfind(prefix, 0) == 0) n += p.value.numel();
    return n;
}

void ParamStore::zero_grads() {
    for (auto& p : params_) {
        p.ensure_grad();
        p.zero_grad();
    }
}

void init_trunc_normal(Tensor& t, Rng& rng, float std_dev) {
    for (auto& v : t.data) {
        double x;
        do {
            x = rng.normal();
        } while (std::abs(x) > 2.0);
        v = float(x * std_dev);
    }
}

void init_zeros(Tensor& t) { std::fill(t.data.begin(), t.data.end(), 0.0f); }
void init_ones(Tensor& t) { std::fill(t.data.begin(), t.data.end(), 1.0f); }

Node* Tape::constant(Tensor v) {
    auto n = std::make_unique<Node>();
    n->val = std::move(v);
    n->requires_grad = false;
    nodes_.push_back(std::move(n));
    return nodes_.back().get();
}

Node* Tape::input(Tensor v) {
    auto n = std::make_unique<Node>();
    n->val = std::move(v);
    n->requires_grad = true;
    n->keep = true;
    nodes_.push_back(std::move(n));
    return nodes_.back().get();
}

Node* Tape::leaf(Param& p) {
    auto n = std::make_unique<Node>();
    n->val = p.value;  // copy; params are small relative to activations
    n->requires_grad = true;
    n->bound = &p;
    nodes_.push_back(std::move(n));
    return nodes_.back().get();
}

Node* Tape::make(Tensor v, std::vector<Node*> parents, std::function<void(Node&)> bwd) {
    auto n = std::make_unique<Node>();
    n->val = std::move(v);
    n->parents = std::move(parents);
    for (Node* p : n->parents)
        if (p->requires_grad) n->requires_grad = true;
    if (n->requires_grad) n->backward = std::move(bwd);
    nodes_.push_back(std::move(n));
    return nodes_.back().get();
}

void Tape::backward(Node* root) {
    if (root->val.numel() != 1) throw std::invalid_argument("backward root must be scalar");
    // Locate root index; parents always precede children, so a reverse sweep
    // from the root is a valid topological order.
    size_t root_idx = nodes_.size();
    for (size_t i = nodes_.size(); i-- > 0;) {
        if (nodes_[i].get() == root) {
            root_idx = i;
            break;
        }
    }
    if (root_idx == nodes_.size()) throw std::invalid_argument("root not on tape");

    root->ensure_grad();
    root->grad.data[0] = 1.0f;

    for (size_t i = root_idx + 1; i-- > 0;) {
        Node& n = *nodes_[i];
        if (!n.has_grad || !n.requires_grad) continue;
        if (n.bound) {
            n.bound->ensure_grad();
            kern::axpy(n.grad.numel(), 1.0f, n.grad.ptr(), n.bound->grad.ptr());
        } else if (n.backward) {
            for (Node* p : n.parents)
                if (p->requires_grad) p->ensure_grad();
            n.backward(n);
            n.backward = nullptr;  // drop tensors captured for the backward pass
        }
        if (!n.keep) {
            n.grad.release();
            n.has_grad = false;
            if (!n.bound) n.val.release();
        }
    }
}

}  // namespace damt
