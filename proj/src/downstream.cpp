#include "damt/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include "damt/common.hpp"
#include "damt/augment.hpp"
#include "damt/pretrain.hpp"

namespace damt::down {

FoldPlan kfold_split(const std::vector<std::string>& ids, const std::vector<int>& class_labels,
                     int k, uint64_t seed) {
    if (int(ids.size()) < k) throw std::invalid_argument("kfold_split: fewer samples than folds");
    const bool stratified = !class_labels.empty();
    if (stratified && class_labels.size() != ids.size())
        throw std::invalid_argument("kfold_split: labels/ids size mismatch");

    std::map<int, std::vector<std::string>> by_class;
    for (size_t i = 0; i < ids.size(); ++i) by_class[stratified ? class_labels[i] : 0].push_back(ids[i]);

    FoldPlan plan;
    plan.k = k;
    Rng rng = Rng(seed).fork("kfold");
    for (auto& [cls, members] : by_class) {
        if (stratified && int(members.size()) < k)
            log_at(LogLevel::Warn, "kfold_split: class %d has %zu members (< %d folds)", cls,
                   members.size(), k);
        std::sort(members.begin(), members.end());
        rng.shuffle(members);
        for (size_t i = 0; i < members.size(); ++i) plan.fold_of[members[i]] = int(i % size_t(k));
    }
    return plan;
}

namespace {

// Mann-Whitney AUC with midrank tie correction; labels are 0/1.
double rank_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    const size_t n = scores.size();
    int64_t n_pos = 0;
    for (int l : labels) n_pos += l;
    const int64_t n_neg = int64_t(n) - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw std::invalid_argument("AUC undefined: both classes must be present");

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t(0));
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * double(i + 1 + j);  // average of ranks i+1..j
        for (size_t t = i; t < j; ++t)
            if (labels[order[t]] == 1) rank_sum_pos += midrank;
        i = j;
    }
    const double u = rank_sum_pos - double(n_pos) * double(n_pos + 1) / 2.0;
    return u / (double(n_pos) * double(n_neg));
}

}  // namespace

double auc_pair_oracle(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0;
    int64_t pairs = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    if (pairs == 0) throw std::invalid_argument("AUC undefined: both classes must be present");
    return wins / double(pairs);
}

FoldMetrics compute_metrics(const std::vector<std::vector<double>>& scores,
                            const std::vector<double>& labels, bool classify) {
    if (scores.size() != labels.size() || scores.size() < 2)
        throw std::invalid_argument("compute_metrics: need >= 2 samples with matching labels");
    FoldMetrics m;
    if (classify) {
        const size_t n_classes = scores[0].size();
        int correct = 0;
        for (size_t i = 0; i < scores.size(); ++i) {
            size_t best = 0;
            for (size_t c = 1; c < n_classes; ++c)
                if (scores[i][c] > scores[i][best]) best = c;
            if (int(best) == int(labels[i])) ++correct;
        }
        m.acc = double(correct) / double(scores.size());

        std::set<int> present;
        for (double l : labels) present.insert(int(l));
        if (present.size() < 2) throw std::invalid_argument("AUC undefined: single-class labels");
        if (n_classes == 2) {
            std::vector<double> s1;
            std::vector<int> lab;
            for (size_t i = 0; i < scores.size(); ++i) {
                s1.push_back(scores[i][1]);
                lab.push_back(int(labels[i]));
            }
            m.auc = rank_auc(s1, lab);
        } else {
            // macro one-vs-rest over classes present in the fold
            double sum = 0;
            int terms = 0;
            for (int c : present) {
                std::vector<double> sc;
                std::vector<int> lab;
                for (size_t i = 0; i < scores.size(); ++i) {
                    sc.push_back(scores[i][size_t(c)]);
                    lab.push_back(int(labels[i]) == c ? 1 : 0);
                }
                sum += rank_auc(sc, lab);
                ++terms;
            }
            m.auc = sum / double(terms);
        }
    } else {
        double abs_sum = 0, mean_y = 0;
        for (double l : labels) mean_y += l;
        mean_y /= double(labels.size());
        double ss_res = 0, ss_tot = 0;
        for (size_t i = 0; i < scores.size(); ++i) {
            const double d = scores[i][0] - labels[i];
            abs_sum += std::abs(d);
            ss_res += d * d;
            ss_tot += (labels[i] - mean_y) * (labels[i] - mean_y);
        }
        m.mae = abs_sum / double(scores.size());
        m.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 0.0;
    }
    return m;
}

// ---- fine-tuning ----

namespace {

// central crop of the support at native resolution (texture stays crisp);
// falls back to resampling when the support is smaller than the input box
vol::Volume downstream_input(const vol::Sample& s, int input_size) {
    const auto [origin, shape] = vol::support_bbox(s.parcellation);
    vol::Shape3 start = origin;
    bool native = true;
    for (int a = 0; a < 3; ++a) {
        const int64_t slack = shape[size_t(a)] - input_size;
        if (slack < 0) native = false;
        start[size_t(a)] = origin[size_t(a)] + std::max<int64_t>(0, slack / 2);
    }
    if (native)
        return vol::crop(s.volume, start, {input_size, input_size, input_size});
    vol::Volume cropped = vol::crop(s.volume, origin, shape);
    return vol::resize_trilinear(cropped, {input_size, input_size, input_size});
}

Tensor to_tensor(const vol::Volume& v) {
    return Tensor({v.shape[0], v.shape[1], v.shape[2]}, v.data);
}

// (prediction - target)^2 on a 1-element node
Node* mse_scalar(Tape& tape, Node* pred, float target) {
    const float d = pred->val.data[0] - target;
    return tape.make(Tensor::scalar(d * d), {pred}, [pred, d](Node& n) {
        if (pred->requires_grad) pred->gptr()[0] += n.grad.data[0] * 2.0f * d;
    });
}

struct FoldRun {
    std::vector<std::vector<double>> scores;
    std::vector<double> labels;
};

FoldRun run_one_fold(const cfg::RunConfig& cfg, const std::vector<vol::Sample>& samples,
                     const std::vector<double>& labels, bool classify, int n_classes,
                     const std::string& checkpoint_path, const FoldPlan& plan, int fold,
                     double label_fraction) {
    // training pool: all ids outside the fold, stratified-subsampled
    std::vector<size_t> train_idx, test_idx;
    for (size_t i = 0; i < samples.size(); ++i) {
        if (plan.fold_of.at(samples[i].sample_id) == fold) test_idx.push_back(i);
        else train_idx.push_back(i);
    }
    if (label_fraction < 1.0) {
        std::map<int, std::vector<size_t>> by_class;
        for (size_t i : train_idx) by_class[classify ? int(labels[i]) : 0].push_back(i);
        Rng rng = Rng(uint64_t(cfg.seed)).fork("fraction").fork(uint64_t(fold));
        std::vector<size_t> kept;
        for (auto& [cls, members] : by_class) {
            (void)cls;
            rng.shuffle(members);
            const size_t keep =
                std::max<size_t>(1, size_t(std::llround(label_fraction * double(members.size()))));
            for (size_t i = 0; i < keep && i < members.size(); ++i) kept.push_back(members[i]);
        }
        std::sort(kept.begin(), kept.end());
        train_idx = std::move(kept);
    }

    // fresh model: encoder + linear head on pooled z, whole model unfrozen
    ParamStore store;
    Rng init = Rng(uint64_t(cfg.seed)).fork("downstream").fork(uint64_t(fold));
    swin::build_encoder(store, cfg.model, init);
    const int out_dim = classify ? n_classes : 1;
    {
        auto& w = store.create("down.w", {cfg.model.bottleneck_dim(), out_dim});
        init_trunc_normal(w.value, init, 0.02f);
        store.create("down.b", {out_dim});
    }
    if (!checkpoint_path.empty()) train::load_matching_params(store, checkpoint_path);

    // inputs prepared once
    std::vector<vol::Volume> inputs(samples.size());
    auto input_of = [&](size_t i) -> const vol::Volume& {
        if (inputs[i].data.empty())
            inputs[i] = downstream_input(samples[i], cfg.downstream.input_size);
        return inputs[i];
    };

    // regression targets are standardized over the training pool so the head
    // reaches them within an Adam-normalized step budget; predictions are
    // mapped back to label units for evaluation
    double y_mu = 0.0, y_sigma = 1.0;
    if (!classify && !train_idx.empty()) {
        for (size_t i : train_idx) y_mu += labels[i] / double(train_idx.size());
        double var = 0.0;
        for (size_t i : train_idx) var += (labels[i] - y_mu) * (labels[i] - y_mu);
        y_sigma = std::sqrt(var / double(train_idx.size()));
        if (y_sigma < 1e-9) y_sigma = 1.0;
    }

    cfg::OptimConfig oc;
    oc.base_lr = cfg.downstream.lr;
    oc.warmup_steps = 10;
    train::AdamW opt(store, oc);

    const int bs = std::max(1, std::min<int>(cfg.downstream.batch_size, int(train_idx.size())));
    const int64_t steps_per_epoch = std::max<int64_t>(1, int64_t(train_idx.size()) / bs);
    const int64_t total_steps = int64_t(cfg.downstream.epochs) * steps_per_epoch;

    Rng order_rng = Rng(uint64_t(cfg.seed)).fork("downorder").fork(uint64_t(fold));
    int64_t step = 0;
    for (int epoch = 0; epoch < cfg.downstream.epochs; ++epoch) {
        std::vector<size_t> order = train_idx;
        order_rng.shuffle(order);
        for (int64_t b = 0; b + bs <= int64_t(order.size()); b += bs) {
            store.zero_grads();
            Tape tape;
            std::vector<Node*> losses;
            for (int64_t i = b; i < b + bs; ++i) {
                const size_t si = order[size_t(i)];
                // random axis-aligned rotation: cheap augmentation that breaks
                // sample-identity shortcuts on small fine-tuning sets
                const auto spec = aug::RotationSpec::from_class(int(order_rng.randint(10)));
                Node* x = tape.constant(to_tensor(aug::rotate90(input_of(si), spec)));
                auto enc = swin::encode(tape, store, cfg.model, x);
                Node* logits = ops::linear(tape, enc.pooled, tape.leaf(store.at("down.w")),
                                           tape.leaf(store.at("down.b")));
                if (classify)
                    losses.push_back(loss::cross_entropy(tape, logits, int(labels[si])));
                else
                    losses.push_back(mse_scalar(tape, logits, float((labels[si] - y_mu) / y_sigma)));
            }
            Node* total = ops::weighted_sum_scalars(
                tape, losses, std::vector<float>(losses.size(), 1.0f / float(losses.size())));
            tape.backward(total);
            opt.step(train::lr_at_step(step, oc, total_steps));
            ++step;
        }
    }

    // held-out evaluation
    FoldRun out;
    for (size_t i : test_idx) {
        Tape tape;
        Node* x = tape.constant(to_tensor(input_of(i)));
        auto enc = swin::encode(tape, store, cfg.model, x);
        Node* logits = ops::linear(tape, enc.pooled, tape.leaf(store.at("down.w")),
                                   tape.leaf(store.at("down.b")));
        std::vector<double> score;
        if (classify) {
            // softmax probabilities
            double mx = logits->val.data[0];
            for (int64_t c = 1; c < logits->val.numel(); ++c)
                mx = std::max(mx, double(logits->val.data[size_t(c)]));
            double sum = 0;
            for (int64_t c = 0; c < logits->val.numel(); ++c) {
                score.push_back(std::exp(double(logits->val.data[size_t(c)]) - mx));
                sum += score.back();
            }
            for (auto& s : score) s /= sum;
        } else {
            score.push_back(y_mu + y_sigma * double(logits->val.data[0]));
        }
        out.scores.push_back(std::move(score));
        out.labels.push_back(labels[i]);
    }
    return out;
}

}  // namespace

MetricSet finetune_run(const cfg::RunConfig& cfg, const std::vector<vol::Sample>& samples,
                       const std::vector<double>& labels, bool classify,
                       const std::string& checkpoint_path, double label_fraction) {
    if (samples.size() != labels.size())
        throw std::invalid_argument("finetune_run: labels/samples size mismatch");
    if (classify)
        for (double l : labels)
            if (l != std::floor(l) || l < 0)
                throw std::invalid_argument("finetune_run: classification labels must be"
                                            " nonnegative integers");

    int n_classes = 2;
    std::vector<int> class_labels;
    if (classify) {
        int mx = 1;
        for (double l : labels) mx = std::max(mx, int(l));
        n_classes = mx + 1;
        for (double l : labels) class_labels.push_back(int(l));
    }

    std::vector<std::string> ids;
    for (const auto& s : samples) ids.push_back(s.sample_id);
    const FoldPlan plan = kfold_split(ids, class_labels, cfg.downstream.folds, uint64_t(cfg.seed));

    MetricSet ms;
    ms.classification = classify;
    for (int fold = 0; fold < plan.k; ++fold) {
        FoldRun run = run_one_fold(cfg, samples, labels, classify, n_classes, checkpoint_path,
                                   plan, fold, label_fraction);
        ms.folds.push_back(compute_metrics(run.scores, run.labels, classify));
    }
    for (const auto& f : ms.folds) {
        ms.mean.acc += f.acc / double(ms.folds.size());
        ms.mean.auc += f.auc / double(ms.folds.size());
        ms.mean.mae += f.mae / double(ms.folds.size());
        ms.mean.r2 += f.r2 / double(ms.folds.size());
    }
    return ms;
}

std::vector<SweepRow> label_fraction_sweep(const cfg::RunConfig& cfg,
                                           const std::vector<vol::Sample>& samples,
                                           const std::vector<double>& labels, bool classify,
                                           const std::string& checkpoint_path,
                                           const std::vector<double>& fractions_in) {
    std::vector<double> fractions = fractions_in;
    if (fractions.empty())
        for (int i = 1; i <= 10; ++i) fractions.push_back(0.1 * i);

    // feasibility: smallest per-class training count at the smallest fraction
    std::map<int, int> class_count;
    for (double l : labels) ++class_count[classify ? int(l) : 0];

    std::vector<SweepRow> rows;
    const std::string task = classify ? "classify" : "regress";
    for (double frac : fractions) {
        if (classify) {
            bool feasible = true;
            for (const auto& [cls, count] : class_count) {
                (void)cls;
                // worst-case training pool is (k-1)/k of the class
                const double train_count = double(count) * double(cfg.downstream.folds - 1) /
                                           double(cfg.downstream.folds);
                if (std::llround(frac * train_count) < 2) feasible = false;
            }
            if (!feasible) {
                log_at(LogLevel::Warn, "label_fraction_sweep: fraction %.2f infeasible, skipped",
                       frac);
                continue;
            }
        }
        for (const char* arm_name : {"pretrained", "scratch"}) {
            const std::string arm = arm_name;
            const std::string ckpt = arm == "pretrained" ? checkpoint_path : "";
            MetricSet ms = finetune_run(cfg, samples, labels, classify, ckpt, frac);
            for (size_t f = 0; f < ms.folds.size(); ++f)
                rows.push_back({task, arm, frac, int(f), ms.folds[f]});
        }
    }
    return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write sweep csv: " + path);
    f << "task,arm,fraction,fold,acc,auc,mae,r2\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%s,%.10g,%d,%.10g,%.10g,%.10g,%.10g\n", r.task.c_str(),
                      r.arm.c_str(), r.fraction, r.fold, r.m.acc, r.m.auc, r.m.mae, r.m.r2);
        f << buf;
    }
}

void write_sweep_summary(const std::vector<SweepRow>& rows, const std::string& path) {
    std::map<std::string, std::array<double, 5>> agg;  // arm -> sums + count
    for (const auto& r : rows) {
        auto& a = agg[r.arm];
        a[0] += r.m.acc;
        a[1] += r.m.auc;
        a[2] += r.m.mae;
        a[3] += r.m.r2;
        a[4] += 1;
    }
    nlohmann::ordered_json j;
    for (const auto& [arm, a] : agg) {
        j[arm] = {{"acc", a[0] / a[4]},
                  {"auc", a[1] / a[4]},
                  {"mae", a[2] / a[4]},
                  {"r2", a[3] / a[4]},
                  {"rows", int64_t(a[4])}};
    }
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write sweep summary: " + path);
    f << j.dump(2) << "\n";
}

}  // namespace damt::down
