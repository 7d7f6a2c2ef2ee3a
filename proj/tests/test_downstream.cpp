#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "damt/dataset.hpp"
#include "damt/downstream.hpp"

using namespace damt;

namespace {

// fast downstream configuration for harness tests
cfg::RunConfig toy_config() {
    cfg::RunConfig c;
    c.seed = 5;
    c.model.embed_dim = 8;
    c.model.depths = {1, 1, 1, 1};
    c.model.num_heads = {1, 2, 4, 8};
    c.model.window = 4;
    c.model.decoder_channels = {16, 12, 10, 8, 6};
    c.head_dims.num_regions = 6;
    c.head_dims.morphology_regions = 6;
    c.downstream.input_size = 32;
    c.downstream.epochs = 8;
    c.downstream.batch_size = 4;
    c.downstream.folds = 4;
    return c;
}

}  // namespace

TEST_CASE("kfold: stratified partition, determinism") {
    std::vector<std::string> ids;
    std::vector<int> labels;
    for (int i = 0; i < 10; ++i) {
        ids.push_back("s" + std::to_string(i));
        labels.push_back(i % 2);
    }
    const auto plan = down::kfold_split(ids, labels, 5, 42);
    CHECK(plan.fold_of.size() == 10);

    // 10 samples, 2 balanced classes, k = 5: each fold holds one of each class
    std::map<int, std::array<int, 2>> fold_class_counts;
    for (size_t i = 0; i < ids.size(); ++i)
        ++fold_class_counts[plan.fold_of.at(ids[i])][size_t(labels[i])];
    CHECK(fold_class_counts.size() == 5);
    for (const auto& [fold, counts] : fold_class_counts) {
        CHECK(counts[0] == 1);
        CHECK(counts[1] == 1);
    }

    // folds are disjoint and cover all ids (fold_of is total by construction)
    std::set<int> folds;
    for (const auto& [id, f] : plan.fold_of) {
        CHECK(f >= 0);
        CHECK(f < 5);
        folds.insert(f);
    }
    CHECK(folds.size() == 5);

    const auto plan2 = down::kfold_split(ids, labels, 5, 42);
    CHECK(plan.fold_of == plan2.fold_of);
    const auto plan3 = down::kfold_split(ids, labels, 5, 43);
    CHECK(plan.fold_of != plan3.fold_of);

    CHECK_THROWS_AS((void)down::kfold_split({"a", "b"}, {0, 1}, 5, 1), std::invalid_argument);
}

TEST_CASE("kfold: partition property over random sizes") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 5 + int(rng.randint(40));
        const int k = 2 + int(rng.randint(5));
        if (n < k) continue;
        std::vector<std::string> ids;
        std::vector<int> labels;
        for (int i = 0; i < n; ++i) {
            ids.push_back("x" + std::to_string(i));
            labels.push_back(int(rng.randint(3)));
        }
        const auto plan = down::kfold_split(ids, labels, k, uint64_t(trial));
        CHECK(plan.fold_of.size() == size_t(n));
        // per-class fold counts differ by at most one
        std::map<int, std::map<int, int>> counts;
        for (size_t i = 0; i < ids.size(); ++i)
            ++counts[labels[i]][plan.fold_of.at(ids[i])];
        for (const auto& [cls, per_fold] : counts) {
            (void)cls;
            int lo = n, hi = 0;
            for (int f = 0; f < k; ++f) {
                const auto it = per_fold.find(f);
                const int c = it == per_fold.end() ? 0 : it->second;
                lo = std::min(lo, c);
                hi = std::max(hi, c);
            }
            CHECK(hi - lo <= 1);
        }
    }
}

TEST_CASE("metrics: perfect ranking, anti-ranking, ties") {
    std::vector<std::vector<double>> scores;
    std::vector<double> labels;
    for (int i = 0; i < 6; ++i) {
        const double p = 0.1 + 0.15 * i;
        scores.push_back({1 - p, p});
        labels.push_back(i < 3 ? 0.0 : 1.0);
    }
    auto m = down::compute_metrics(scores, labels, true);
    CHECK(m.auc == doctest::Approx(1.0));
    CHECK(m.acc == doctest::Approx(1.0));

    // reversed ranking
    std::reverse(labels.begin(), labels.end());
    m = down::compute_metrics(scores, labels, true);
    CHECK(m.auc == doctest::Approx(0.0));

    // all scores tied -> AUC 0.5 by midrank correction
    std::vector<std::vector<double>> tied(6, {0.5, 0.5});
    m = down::compute_metrics(tied, labels, true);
    CHECK(m.auc == doctest::Approx(0.5));

    std::vector<double> single(6, 1.0);
    CHECK_THROWS_AS((void)down::compute_metrics(scores, single, true), std::invalid_argument);
}

TEST_CASE("metrics: regression MAE and R2") {
    std::vector<std::vector<double>> scores = {{1.0}, {2.0}, {3.0}, {4.0}};
    std::vector<double> labels = {1.0, 2.0, 3.0, 4.0};
    auto m = down::compute_metrics(scores, labels, false);
    CHECK(m.mae == doctest::Approx(0.0));
    CHECK(m.r2 == doctest::Approx(1.0));

    // mean predictor has R2 = 0
    std::vector<std::vector<double>> mean_pred(4, {2.5});
    m = down::compute_metrics(mean_pred, labels, false);
    CHECK(m.r2 == doctest::Approx(0.0));
    CHECK(m.mae == doctest::Approx(1.0));
}

TEST_CASE("rank AUC equals the pair-counting oracle") {
    Rng rng(12);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 4 + int(rng.randint(47));
        std::vector<std::vector<double>> scores;
        std::vector<double> labels;
        std::vector<double> s1;
        std::vector<int> lab;
        bool has0 = false, has1 = false;
        for (int i = 0; i < n; ++i) {
            // coarse grid scores so ties actually occur
            const double p = double(rng.randint(8)) / 7.0;
            const int l = int(rng.randint(2));
            scores.push_back({1 - p, p});
            labels.push_back(double(l));
            s1.push_back(p);
            lab.push_back(l);
            has0 |= l == 0;
            has1 |= l == 1;
        }
        if (!has0 || !has1) continue;
        const auto m = down::compute_metrics(scores, labels, true);
        CHECK(m.auc == doctest::Approx(down::auc_pair_oracle(s1, lab)).epsilon(1e-12));
    }
}

TEST_CASE("finetune: separable labels reach AUC 1.0") {
    auto c = toy_config();
    c.downstream.lr = 1e-3;
    c.downstream.epochs = 16;
    c.downstream.folds = 5;
    auto ds = data::make_dataset(20, 48, 6, 31, 0.5);  // half carry the marker
    std::vector<double> labels;
    for (const auto& s : ds.samples) labels.push_back(double(ds.labels.class_of.at(s.sample_id)));

    const auto ms = down::finetune_run(c, ds.samples, labels, true);
    REQUIRE(ms.folds.size() == 5);
    CHECK(ms.mean.auc == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("finetune: regression against a function of phantom region count") {
    auto c = toy_config();
    c.downstream.lr = 1e-3;
    c.downstream.epochs = 20;
    c.downstream.folds = 5;
    auto ds = data::make_mixed_regions_dataset(20, 48, {4, 6, 8, 10, 12}, 77);
    std::vector<double> y;
    for (const auto& s : ds.samples) y.push_back(ds.labels.value_of.at(s.sample_id));
    const auto ms = down::finetune_run(c, ds.samples, y, false);
    CHECK(ms.mean.r2 > 0.9);
}

TEST_CASE("finetune: labels independent of inputs give chance AUC") {
    auto c = toy_config();
    c.downstream.epochs = 4;
    auto ds = data::make_dataset(16, 48, 6, 37);
    Rng rng(41);
    std::vector<double> labels;
    for (size_t i = 0; i < ds.samples.size(); ++i) labels.push_back(double(i % 2));
    // shuffle labels independently of content
    for (size_t i = labels.size(); i > 1; --i)
        std::swap(labels[i - 1], labels[size_t(rng.randint(int64_t(i)))]);
    const auto ms = down::finetune_run(c, ds.samples, labels, true);
    CHECK(ms.mean.auc > 0.15);
    CHECK(ms.mean.auc < 0.85);
}

TEST_CASE("sweep: emits rows per fraction, fraction 1.0 equals plain run") {
    auto c = toy_config();
    c.downstream.epochs = 2;
    c.downstream.folds = 3;
    auto ds = data::make_dataset(12, 48, 6, 43, 0.5);
    std::vector<double> labels;
    for (const auto& s : ds.samples) labels.push_back(double(ds.labels.class_of.at(s.sample_id)));

    const auto rows = down::label_fraction_sweep(c, ds.samples, labels, true, "",
                                                 {0.5, 1.0});
    std::set<double> fractions;
    for (const auto& r : rows) fractions.insert(r.fraction);
    CHECK(fractions == std::set<double>{0.5, 1.0});
    // both arms, all folds
    CHECK(rows.size() == 2u * 2u * 3u);

    const auto plain = down::finetune_run(c, ds.samples, labels, true, "");
    for (const auto& r : rows) {
        if (r.fraction == 1.0 && r.arm == "scratch") {
            CHECK(r.m.acc == doctest::Approx(plain.folds[size_t(r.fold)].acc));
            CHECK(r.m.auc == doctest::Approx(plain.folds[size_t(r.fold)].auc));
        }
    }

    const std::string dir = std::filesystem::temp_directory_path().string();
    down::write_sweep_csv(rows, dir + "/sweep_test.csv");
    std::ifstream f(dir + "/sweep_test.csv");
    std::string header;
    std::getline(f, header);
    CHECK(header == "task,arm,fraction,fold,acc,auc,mae,r2");
}
