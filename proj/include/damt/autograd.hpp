#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "damt/rng.hpp"
#include "damt/tensor.hpp"

namespace damt {

// Named learnable tensor with a persistent gradient accumulator.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;  // lazily sized on first accumulation

    void ensure_grad() {
        if (grad.numel() != value.numel()) grad = Tensor(value.shape);
    }
    void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0f); }
};

// Ordered store (insertion order fixes checkpoint payload layout).
class ParamStore {
public:
    Param& create(const std::string& name, std::vector<int64_t> shape);
    Param& at(const std::string& name);
    const Param& at(const std::string& name) const;
    bool contains(const std::string& name) const;
    int64_t total_params() const;
    int64_t total_params_with_prefix(const std::string& prefix) const;
    std::vector<Param>& params() { return params_; }
    const std::vector<Param>& params() const { return params_; }
    void zero_grads();

private:
    std::vector<Param> params_;
    std::map<std::string, size_t> index_;
};

void init_trunc_normal(Tensor& t, Rng& rng, float std_dev);
void init_zeros(Tensor& t);
void init_ones(Tensor& t);

class Tape;

// Tape node: value plus a closure that routes the output gradient to the
// parents. Values and gradients are freed eagerly during backward.
struct Node {
    Tensor val;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    bool keep = false;  // do not free val during backward (loss outputs etc.)
    Param* bound = nullptr;
    std::vector<Node*> parents;
    std::function<void(Node&)> backward;

    float* gptr() { return grad.ptr(); }
    void ensure_grad() {
        if (!has_grad) {
            grad = Tensor(val.shape);
            has_grad = true;
        }
    }
};

class Tape {
public:
    // Constant input (no gradient tracking).
    Node* constant(Tensor v);
    // Input that wants a gradient but is not a Param (used by tests).
    Node* input(Tensor v);
    // Leaf bound to a Param; backward accumulates into p.grad.
    Node* leaf(Param& p);
    // Generic op node.
    Node* make(Tensor v, std::vector<Node*> parents, std::function<void(Node&)> bwd);

    // Reverse pass from a scalar root; frees intermediate values/grads as it
    // goes, so the tape cannot be replayed afterwards.
    void backward(Node* root);

    size_t size() const { return nodes_.size(); }

private:
    std::vector<std::unique_ptr<Node>> nodes_;
};

}  // namespace damt
