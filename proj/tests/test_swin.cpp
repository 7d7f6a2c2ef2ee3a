#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "damt/swin.hpp"

using namespace damt;
using vol::Shape3;

namespace {

swin::SwinConfig tiny_config() {
    swin::SwinConfig cfg;
    cfg.embed_dim = 12;
    cfg.depths = {1, 1, 2, 1};
    cfg.num_heads = {2, 2, 4, 4};
    cfg.window = 4;
    cfg.decoder_channels = {32, 24, 16, 12, 8};
    return cfg;
}

Tensor random_tensor(Rng& rng, std::vector<int64_t> shape) {
    Tensor t(std::move(shape));
    for (auto& v : t.data) v = rng.uniform_f(-1.0f, 1.0f);
    return t;
}

}  // namespace

TEST_CASE("window partition: counts and pad records") {
    Rng rng(1);
    // 14^3 grid, window 7: 8 full windows, no padding
    auto t = random_tensor(rng, {14, 14, 14, 3});
    auto [blocks, pad] = swin::window_partition(t, 7);
    CHECK(blocks.shape == std::vector<int64_t>{8, 343, 3});
    CHECK(pad == Shape3{0, 0, 0});

    // 8^3 grid padded to 14^3: 8 windows, pad record (6,6,6)
    auto t8 = random_tensor(rng, {8, 8, 8, 2});
    auto [blocks8, pad8] = swin::window_partition(t8, 7);
    CHECK(blocks8.shape == std::vector<int64_t>{8, 343, 2});
    CHECK(pad8 == Shape3{6, 6, 6});
}

TEST_CASE("window partition/reverse: bit-exact round trip over random shapes") {
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        const int window = 2 + int(rng.randint(6));
        const Shape3 g{4 + rng.randint(17), 4 + rng.randint(17), 4 + rng.randint(17)};
        const int64_t ch = 1 + rng.randint(5);
        auto t = random_tensor(rng, {g[0], g[1], g[2], ch});
        auto [blocks, pad] = swin::window_partition(t, window);
        const Tensor back = swin::window_reverse(blocks, window, g, pad);
        CHECK(back.data == t.data);
    }
}

TEST_CASE("window reverse: mismatched block count rejected, shuffles detected") {
    Rng rng(3);
    auto t = random_tensor(rng, {9, 9, 9, 2});
    auto [blocks, pad] = swin::window_partition(t, 7);
    CHECK_THROWS_AS((void)swin::window_reverse(blocks, 7, {20, 20, 20}, pad),
                    std::invalid_argument);

    // swapping two blocks must not reproduce the original
    Tensor shuffled = blocks;
    const int64_t bsz = blocks.dim(1) * blocks.dim(2);
    for (int64_t i = 0; i < bsz; ++i)
        std::swap(shuffled.data[size_t(i)], shuffled.data[size_t(bsz + i)]);
    const Tensor back = swin::window_reverse(shuffled, 7, {9, 9, 9}, pad);
    CHECK(back.data != t.data);
}

TEST_CASE("cyclic shift round trip") {
    Rng rng(4);
    auto t = random_tensor(rng, {6, 5, 7, 3});
    const Tensor shifted = swin::cyclic_shift(t, {3, 2, 1});
    const Tensor back = swin::cyclic_shift(shifted, {-3, -2, -1});
    CHECK(back.data == t.data);
}

TEST_CASE("relative bias index: delta range and distinct count for window 7") {
    const auto idx = swin::relative_bias_index(7);
    CHECK(idx.size() == 343u * 343u);
    std::set<int32_t> distinct(idx.begin(), idx.end());
    CHECK(distinct.size() == 2197u);  // 13^3
    CHECK(*distinct.begin() == 0);
    CHECK(*distinct.rbegin() == 2196);
}

TEST_CASE("shifted-window mask separates pre-shift windows") {
    // 8x8x8 grid, window 4, shift 2: tokens from different pre-shift windows
    // must never attend to each other
    const Shape3 grid{8, 8, 8};
    const int w = 4;
    const Shape3 shift{2, 2, 2};
    const auto mask = swin::build_attention_mask(grid, w, shift);
    REQUIRE(mask.window_type);
    REQUIRE(mask.bank);

    const int64_t tokens = w * w * w;
    auto pre_window = [&](int64_t wi, int64_t ti, int axis) {
        const int64_t nw = 2;  // 8/4 per axis
        const int64_t wz = wi / (nw * nw), wy = (wi / nw) % nw, wx = wi % nw;
        const int64_t tz = ti / (w * w), ty = (ti / w) % w, tx = ti % w;
        const int64_t coord[3] = {wz * w + tz, wy * w + ty, wx * w + tx};
        const int64_t shifted = (coord[axis] + shift[size_t(axis)]) % 8;
        return shifted / w;
    };

    for (int64_t wi = 0; wi < int64_t(mask.window_type->size()); ++wi) {
        const int32_t type = (*mask.window_type)[size_t(wi)];
        for (int64_t i = 0; i < tokens; ++i)
            for (int64_t j = 0; j < tokens; ++j) {
                bool same = true;
                for (int a = 0; a < 3; ++a)
                    if (pre_window(wi, i, a) != pre_window(wi, j, a)) same = false;
                const float mval =
                    type < 0 ? 0.0f : (*mask.bank)[size_t(type) * tokens * tokens +
                                                   size_t(i * tokens + j)];
                if (same) CHECK(mval == 0.0f);
                else CHECK(mval < -1e8f);
            }
    }
}

TEST_CASE("encoder shapes: embed, stages, pyramid, pooled") {
    auto cfg = tiny_config();
    ParamStore store;
    Rng rng(7);
    swin::build_encoder(store, cfg, rng);

    Tape tape;
    Rng drng(8);
    Node* x = tape.constant(random_tensor(drng, {32, 32, 32}));
    auto enc = swin::encode(tape, store, cfg, x);

    REQUIRE(enc.pyramid.size() == 5);
    CHECK(enc.pyramid[0]->val.shape == std::vector<int64_t>{16, 16, 16, 12});
    CHECK(enc.pyramid[1]->val.shape == std::vector<int64_t>{8, 8, 8, 24});
    CHECK(enc.pyramid[2]->val.shape == std::vector<int64_t>{4, 4, 4, 48});
    CHECK(enc.pyramid[3]->val.shape == std::vector<int64_t>{2, 2, 2, 96});
    CHECK(enc.pyramid[4]->val.shape == std::vector<int64_t>{1, 1, 1, 192});
    CHECK(enc.pooled->val.shape == std::vector<int64_t>{192});

    for (float v : enc.final_grid->val.data) CHECK(std::isfinite(v));

    Tape t2;
    Node* bad = t2.constant(random_tensor(drng, {33, 32, 32}));
    CHECK_THROWS_AS((void)swin::encode(t2, store, cfg, bad), std::invalid_argument);
}

TEST_CASE("table-A architecture: stage dims and bottleneck 768") {
    swin::SwinConfig cfg;  // defaults are the paper-scale configuration
    CHECK(cfg.embed_dim == 48);
    CHECK(cfg.depths == std::vector<int>{2, 2, 18, 2});
    CHECK(cfg.num_heads == std::vector<int>{3, 6, 12, 24});
    CHECK(cfg.window == 7);
    CHECK(cfg.bottleneck_dim() == 768);
    CHECK(cfg.total_downsample() == 32);
}

TEST_CASE("patch merge parameter count follows (8 Cin)(2 Cin) + norm + bias") {
    auto cfg = tiny_config();
    ParamStore store;
    Rng rng(9);
    swin::build_encoder(store, cfg, rng);
    for (int s = 0; s < 4; ++s) {
        const int64_t dim = cfg.stage_dim(s);
        const std::string m = "enc.merge" + std::to_string(s);
        const int64_t got = store.total_params_with_prefix(m + ".");
        CHECK(got == (8 * dim) * (2 * dim) + 2 * dim + 2 * (8 * dim));
    }
}

TEST_CASE("full forward is finite across random seeds") {
    auto cfg = tiny_config();
    cfg.depths = {1, 1, 1, 1};
    ParamStore store;
    Rng rng(11);
    swin::build_encoder(store, cfg, rng);
    for (int seed = 0; seed < 100; ++seed) {
        Tape tape;
        Rng drng(uint64_t(seed) + 1000);
        Node* x = tape.constant(random_tensor(drng, {32, 32, 32}));
        auto enc = swin::encode(tape, store, cfg, x);
        for (float v : enc.pooled->val.data) REQUIRE(std::isfinite(v));
    }
}

TEST_CASE("every encoder parameter receives gradient from a scalar loss") {
    // window 2 on a 16-token grid realizes every relative delta, so even the
    // bias tables are fully exercised
    swin::SwinConfig cfg;
    cfg.embed_dim = 8;
    cfg.depths = {2, 1};
    cfg.num_heads = {2, 2};
    cfg.window = 2;
    cfg.decoder_channels = {8, 8, 8};
    ParamStore store;
    Rng rng(13);
    swin::build_encoder(store, cfg, rng);
    store.zero_grads();

    Tape tape;
    Rng drng(14);
    Node* x = tape.constant(random_tensor(drng, {8, 8, 8}));
    auto enc = swin::encode(tape, store, cfg, x);
    Node* loss = ops::sum_all(tape, ops::gelu(tape, enc.pooled));
    tape.backward(loss);

    for (const auto& p : store.params()) {
        double norm = 0;
        for (float g : p.grad.data) norm += std::abs(double(g));
        CAPTURE(p.name);
        CHECK(norm > 0.0);
    }
}
