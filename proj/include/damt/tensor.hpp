#pragma once

#include <cassert>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

namespace damt {

// Dense float32 tensor, contiguous row-major (last dimension fastest).
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<int64_t> s) : shape(std::move(s)) {
        data.assign(size_t(numel_of(shape)), 0.0f);
    }
    Tensor(std::vector<int64_t> s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {
        assert(int64_t(data.size()) == numel_of(shape));
    }

    static int64_t numel_of(const std::vector<int64_t>& s) {
        int64_t n = 1;
        for (int64_t d : s) n *= d;
        return n;
    }

    static Tensor zeros(std::vector<int64_t> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int64_t> s, float v) {
        Tensor t(std::move(s));
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }
    static Tensor scalar(float v) { return Tensor({1}, {v}); }

    int64_t numel() const { return int64_t(data.size()); }
    int64_t dim(size_t i) const { return shape[i]; }
    int ndim() const { return int(shape.size()); }
    int64_t last_dim() const { return shape.empty() ? 1 : shape.back(); }
    int64_t rows() const { return last_dim() == 0 ? 0 : numel() / last_dim(); }

    float* ptr() { return data.data(); }
    const float* ptr() const { return data.data(); }

    // Same storage, new shape (element count must match).
    Tensor reshaped(std::vector<int64_t> s) const {
        assert(numel_of(s) == numel());
        return Tensor(std::move(s), data);
    }

    void release() {
        data.clear();
        data.shrink_to_fit();
    }
};

}  // namespace damt
