#include "damt/pretrain.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <thread>

#include "damt/common.hpp"
#include "damt/kern/kernels.hpp"
#include "damt/sha256.hpp"

namespace damt::train {

double lr_at_step(int64_t step, const cfg::OptimConfig& oc, int64_t total_steps) {
    if (step < 0) throw std::invalid_argument("lr_at_step: negative step");
    const int64_t warmup = oc.warmup_steps;
    if (warmup > 0 && step < warmup) return oc.base_lr * double(step) / double(warmup);
    if (step >= total_steps) return 0.0;
    const int64_t last = total_steps - 1;
    if (last <= warmup) return oc.base_lr;
    const double progress = double(step - warmup) / double(last - warmup);
    return oc.base_lr * 0.5 * (1.0 + std::cos(M_PI * progress));
}

AdamW::AdamW(ParamStore& store, const cfg::OptimConfig& oc) : store_(store), oc_(oc) {
    m_.reserve(store.params().size());
    v_.reserve(store.params().size());
    for (auto& p : store.params()) {
        m_.emplace_back(p.value.shape);
        v_.emplace_back(p.value.shape);
    }
}

void AdamW::step(double lr) {
    ++t_;
    const float bc1 = float(1.0 - std::pow(oc_.beta1, double(t_)));
    const float bc2 = float(1.0 - std::pow(oc_.beta2, double(t_)));
    auto& params = store_.params();
    for (size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        p.ensure_grad();
        kern::adamw(p.value.numel(), p.value.ptr(), p.grad.ptr(), m_[i].ptr(), v_[i].ptr(),
                    float(lr), float(oc_.beta1), float(oc_.beta2), 1e-8f,
                    float(oc_.weight_decay), bc1, bc2);
    }
}

Model Model::build(const cfg::RunConfig& cfg, uint64_t init_seed) {
    Model m;
    m.swin_cfg = cfg.model;
    m.dims = cfg.head_dims;
    Rng rng = Rng(init_seed).fork("init");
    swin::build_encoder(m.store, m.swin_cfg, rng);
    heads::build_heads(m.store, m.swin_cfg, m.dims, rng);
    return m;
}

namespace {

Tensor volume_tensor(const vol::Volume& v) {
    return Tensor({v.shape[0], v.shape[1], v.shape[2]}, v.data);
}

int argmax(const Tensor& t) {
    int best = 0;
    for (int64_t i = 1; i < t.numel(); ++i)
        if (t.data[size_t(i)] > t.data[size_t(best)]) best = int(i);
    return best;
}

double mean_of(const std::vector<Node*>& nodes) {
    double s = 0;
    for (Node* n : nodes) s += double(n->val.data[0]);
    return nodes.empty() ? 0.0 : s / double(nodes.size());
}

Node* mean_node(Tape& tape, const std::vector<Node*>& nodes) {
    return ops::weighted_sum_scalars(
        tape, nodes, std::vector<float>(nodes.size(), 1.0f / float(nodes.size())));
}

}  // namespace

StepStats train_step(Model& model, const std::vector<aug::ViewSet>& batch,
                     const loss::LossWeights& weights, const loss::TaskFlags& flags, AdamW& opt,
                     double lr) {
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
    if (flags.contrastive && batch.size() < 2)
        throw ConfigError("contrastive task requires batch size >= 2");

    ParamStore& store = model.store;
    store.zero_grads();
    Tape tape;

    std::vector<Node*> l_anat, l_morph, l_rad, l_rot, l_loc, l_mim, l_slot;
    const int num_slots = 1 + int(batch[0].views.size() / 2) - 1;
    std::vector<std::vector<Node*>> slot_z{size_t(num_slots)};
    int rot_correct = 0, rot_total = 0, loc_correct = 0, loc_total = 0;
    const int morph_r = int(batch[0].morph_target.size() / 2);

    for (const auto& vs : batch) {
        auto morph_target = std::make_shared<const std::vector<float>>(
            std::vector<float>(vs.morph_target.begin(), vs.morph_target.end()));
        auto radio_target = std::make_shared<const std::vector<float>>(
            std::vector<float>(vs.radio_target.begin(), vs.radio_target.end()));

        for (const auto& view : vs.views) {
            Node* x = tape.constant(volume_tensor(view.input));
            auto enc = swin::encode(tape, store, model.swin_cfg, x);

            if (flags.anatomy && !view.present_regions.empty()) {
                Node* logits =
                    heads::seg_decode(tape, store, model.swin_cfg, enc.pyramid,
                                      model.dims.num_regions);
                auto labels = std::make_shared<const std::vector<int>>(
                    std::vector<int>(view.labels.labels.begin(), view.labels.labels.end()));
                auto present = std::make_shared<const std::vector<int>>(view.present_regions);
                l_anat.push_back(loss::dice_loss(tape, logits, labels, present));
            }
            if (flags.morphology && !view.present_regions.empty()) {
                std::vector<int> active;
                for (int r : view.present_regions) {
                    if (r <= morph_r) {
                        active.push_back(r - 1);
                        active.push_back(morph_r + r - 1);
                    }
                }
                if (!active.empty()) {
                    Node* pred = heads::mlp_regress(tape, store, "morph", enc.pooled);
                    l_morph.push_back(loss::masked_l1(
                        tape, pred, morph_target,
                        std::make_shared<const std::vector<int>>(std::move(active)),
                        weights.region_sum));
                }
            }
            if (flags.radiomics && !view.present_regions.empty()) {
                std::array<bool, 3> group_present{false, false, false};
                for (int r : view.present_regions)
                    if (size_t(r) <= vs.tissue_group.size())
                        group_present[size_t(vs.tissue_group[size_t(r - 1)] - 1)] = true;
                std::vector<int> active;
                for (int g = 0; g < 3; ++g)
                    if (group_present[size_t(g)])
                        for (int i = 0; i < 24; ++i) active.push_back(g * 24 + i);
                if (!active.empty()) {
                    Node* pred = heads::mlp_regress(tape, store, "rad", enc.pooled);
                    l_rad.push_back(loss::masked_l1(
                        tape, pred, radio_target,
                        std::make_shared<const std::vector<int>>(std::move(active)),
                        weights.region_sum));
                }
            }
            if (flags.rotation) {
                Node* logits = heads::linear_classify(tape, store, "rot", enc.pooled);
                l_rot.push_back(loss::cross_entropy(tape, logits, view.rotation.class_id));
                rot_correct += argmax(logits->val) == view.rotation.class_id ? 1 : 0;
                ++rot_total;
            }
            if (flags.mim && view.mask.has_value()) {
                Node* recon = heads::mim_reconstruct(tape, store, model.swin_cfg, enc.final_grid);
                const auto vm = view.mask->voxel_mask();
                auto mask8 = std::make_shared<const std::vector<uint8_t>>([&] {
                    std::vector<uint8_t> m(vm.size());
                    for (size_t i = 0; i < vm.size(); ++i) m[i] = vm[i] != 0.0f ? 1 : 0;
                    return m;
                }());
                auto original = std::make_shared<const std::vector<float>>(
                    view.recon_target.data);
                l_mim.push_back(loss::mim_l1(tape, recon, original, mask8));
            }
            if (flags.contrastive) {
                Node* z = heads::contrastive_project(tape, store, enc.pooled);
                slot_z[size_t(view.slot)].push_back(z);
            }
        }

        if (flags.location) {
            for (const auto& patches : vs.location) {
                for (const auto& lp : patches) {
                    Node* px = tape.constant(volume_tensor(lp.patch));
                    auto penc = swin::encode(tape, store, model.swin_cfg, px);
                    Node* logits = heads::linear_classify(tape, store, "loc", penc.pooled);
                    l_loc.push_back(loss::cross_entropy(tape, logits, lp.octant_id));
                    loc_correct += argmax(logits->val) == lp.octant_id ? 1 : 0;
                    ++loc_total;
                }
            }
        }
    }

    // contrastive loss per view slot, summed over slots
    if (flags.contrastive) {
        for (const auto& zs : slot_z) {
            std::vector<int> partner(zs.size());
            for (size_t i = 0; i < zs.size(); ++i) partner[i] = int(i ^ 1);
            l_slot.push_back(loss::ntxent(tape, zs, partner, float(weights.tau)));
        }
    }

    StepStats stats;
    loss::LossReport comp;
    std::vector<Node*> total_terms;
    std::vector<float> total_weights;
    auto add_task = [&](bool active, std::vector<Node*>& nodes, double lambda, double& out,
                        const char* name) {
        if (!active || nodes.empty()) return;
        Node* m = mean_node(tape, nodes);
        out = double(m->val.data[0]);
        if (!std::isfinite(out))
            throw std::runtime_error(std::string("NaN loss in task ") + name);
        total_terms.push_back(m);
        total_weights.push_back(float(lambda));
    };
    add_task(flags.anatomy, l_anat, weights.lambda1, comp.anatomy, "anatomy");
    add_task(flags.morphology, l_morph, weights.lambda2, comp.morpho, "morphology");
    add_task(flags.radiomics, l_rad, weights.lambda3, comp.radiomics, "radiomics");
    add_task(flags.rotation, l_rot, weights.lambda4, comp.rot, "rotation");
    add_task(flags.location, l_loc, weights.lambda5, comp.loc, "location");
    add_task(flags.mim, l_mim, weights.lambda6, comp.mim, "mim");
    if (flags.contrastive && !l_slot.empty()) {
        Node* c = ops::weighted_sum_scalars(tape, l_slot,
                                            std::vector<float>(l_slot.size(), 1.0f));
        comp.contrast = double(c->val.data[0]);
        if (!std::isfinite(comp.contrast)) throw std::runtime_error("NaN loss in task contrastive");
        total_terms.push_back(c);
        total_weights.push_back(float(weights.lambda7));
    }
    comp.skipped_morpho = flags.morphology && l_morph.empty();
    comp.skipped_radiomics = flags.radiomics && l_rad.empty();

    if (total_terms.empty()) throw ConfigError("train_step: no active tasks");
    Node* total = ops::weighted_sum_scalars(tape, total_terms, total_weights);
    if (!std::isfinite(double(total->val.data[0])))
        throw std::runtime_error("NaN loss in total");

    tape.backward(total);
    opt.step(lr);

    stats.report = loss::total_loss(comp, weights, flags);
    stats.acc_rot = rot_total ? double(rot_correct) / rot_total : 0.0;
    stats.acc_loc = loc_total ? double(loc_correct) / loc_total : 0.0;
    (void)mean_of;
    return stats;
}

// ---- checkpointing ----

namespace {

constexpr char kCkptMagic[4] = {'D', 'M', 'T', 'C'};

std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)v);
    return buf;
}

uint64_t parse_hex64(const std::string& s) { return std::stoull(s, nullptr, 16); }

}  // namespace

void save_checkpoint(const Model& model, const AdamW& opt, const CheckpointMeta& meta,
                     const std::string& path) {
    const auto& params = model.store.params();
    nlohmann::ordered_json manifest;
    manifest["format"] = "DMTC";
    manifest["version"] = 1;
    manifest["step"] = meta.step;
    manifest["epoch"] = meta.epoch;
    manifest["rng"] = {hex64(meta.rng_state[0]), hex64(meta.rng_state[1]),
                       hex64(meta.rng_state[2]), hex64(meta.rng_state[3])};
    manifest["config"] = meta.config;

    std::string payload;
    nlohmann::ordered_json plist = nlohmann::ordered_json::array();
    int64_t offset = 0;
    for (const auto& p : params) {
        nlohmann::ordered_json e;
        e["name"] = p.name;
        e["shape"] = p.value.shape;
        e["dtype"] = "f32";
        e["offset"] = offset;
        e["numel"] = p.value.numel();
        plist.push_back(e);
        payload.append(reinterpret_cast<const char*>(p.value.ptr()), size_t(p.value.numel()) * 4);
        offset += p.value.numel() * 4;
    }
    manifest["params"] = plist;

    auto& m = const_cast<AdamW&>(opt).moments_m();
    auto& v = const_cast<AdamW&>(opt).moments_v();
    manifest["optimizer"] = {{"step_count", opt.step_count()}, {"m_offset", offset}};
    for (const auto& t : m) {
        payload.append(reinterpret_cast<const char*>(t.ptr()), size_t(t.numel()) * 4);
        offset += t.numel() * 4;
    }
    manifest["optimizer"]["v_offset"] = offset;
    for (const auto& t : v) {
        payload.append(reinterpret_cast<const char*>(t.ptr()), size_t(t.numel()) * 4);
        offset += t.numel() * 4;
    }
    manifest["payload_sha256"] = sha256_hex(payload.data(), payload.size());

    const std::string mstr = manifest.dump();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
    f.write(kCkptMagic, 4);
    const char version = 1;
    f.write(&version, 1);
    const uint32_t mlen = uint32_t(mstr.size());
    f.write(reinterpret_cast<const char*>(&mlen), 4);
    f.write(mstr.data(), std::streamsize(mstr.size()));
    f.write(payload.data(), std::streamsize(payload.size()));
    if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

nlohmann::ordered_json read_manifest(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open checkpoint: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kCkptMagic, 4) != 0)
        throw FormatError("bad magic in checkpoint " + path);
    char version = 0;
    f.read(&version, 1);
    if (version != 1) throw FormatError("unsupported checkpoint version in " + path);
    uint32_t mlen = 0;
    f.read(reinterpret_cast<char*>(&mlen), 4);
    std::string mstr(mlen, '\0');
    f.read(mstr.data(), mlen);
    if (!f) throw FormatError("truncated checkpoint manifest in " + path);
    return nlohmann::ordered_json::parse(mstr);
}

CheckpointMeta load_checkpoint(Model& model, AdamW* opt, const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open checkpoint: " + path);
    std::string all((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (all.size() < 9 || std::memcmp(all.data(), kCkptMagic, 4) != 0)
        throw FormatError("bad magic in checkpoint " + path);
    if (all[4] != 1) throw FormatError("unsupported checkpoint version in " + path);
    uint32_t mlen = 0;
    std::memcpy(&mlen, all.data() + 5, 4);
    if (all.size() < 9 + size_t(mlen)) throw FormatError("truncated checkpoint manifest");
    const auto manifest = nlohmann::ordered_json::parse(all.substr(9, mlen));
    const std::string payload = all.substr(9 + mlen);

    const std::string want = manifest.at("payload_sha256").get<std::string>();
    const std::string got = sha256_hex(payload.data(), payload.size());
    if (want != got) throw CorruptionError("checkpoint payload hash mismatch in " + path);

    for (const auto& e : manifest.at("params")) {
        const std::string name = e.at("name").get<std::string>();
        if (!model.store.contains(name))
            throw FormatError("checkpoint param not in model: " + name);
        Param& p = model.store.at(name);
        const int64_t numel = e.at("numel").get<int64_t>();
        const int64_t offset = e.at("offset").get<int64_t>();
        if (numel != p.value.numel())
            throw FormatError("checkpoint param size mismatch: " + name);
        if (offset + numel * 4 > int64_t(payload.size()))
            throw CorruptionError("checkpoint payload too short for " + name);
        std::memcpy(p.value.ptr(), payload.data() + offset, size_t(numel) * 4);
    }
    if (opt) {
        const auto& o = manifest.at("optimizer");
        opt->set_step_count(o.at("step_count").get<int64_t>());
        int64_t off = o.at("m_offset").get<int64_t>();
        for (auto& t : opt->moments_m()) {
            std::memcpy(t.ptr(), payload.data() + off, size_t(t.numel()) * 4);
            off += t.numel() * 4;
        }
        off = o.at("v_offset").get<int64_t>();
        for (auto& t : opt->moments_v()) {
            std::memcpy(t.ptr(), payload.data() + off, size_t(t.numel()) * 4);
            off += t.numel() * 4;
        }
    }

    CheckpointMeta meta;
    meta.step = manifest.at("step").get<int64_t>();
    meta.epoch = manifest.at("epoch").get<int64_t>();
    const auto& rng = manifest.at("rng");
    for (int i = 0; i < 4; ++i) meta.rng_state[size_t(i)] = parse_hex64(rng[size_t(i)]);
    meta.config = manifest.at("config");
    return meta;
}

int load_matching_params(ParamStore& store, const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open checkpoint: " + path);
    std::string all((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (all.size() < 9 || std::memcmp(all.data(), kCkptMagic, 4) != 0)
        throw FormatError("bad magic in checkpoint " + path);
    uint32_t mlen = 0;
    std::memcpy(&mlen, all.data() + 5, 4);
    const auto manifest = nlohmann::ordered_json::parse(all.substr(9, mlen));
    const std::string payload = all.substr(9 + mlen);
    const std::string want = manifest.at("payload_sha256").get<std::string>();
    if (want != sha256_hex(payload.data(), payload.size()))
        throw CorruptionError("checkpoint payload hash mismatch in " + path);

    int matched = 0;
    for (const auto& e : manifest.at("params")) {
        const std::string name = e.at("name").get<std::string>();
        if (!store.contains(name)) continue;
        Param& p = store.at(name);
        const int64_t numel = e.at("numel").get<int64_t>();
        if (numel != p.value.numel()) continue;
        const int64_t offset = e.at("offset").get<int64_t>();
        std::memcpy(p.value.ptr(), payload.data() + offset, size_t(numel) * 4);
        ++matched;
    }
    if (matched == 0) throw FormatError("no matching params in checkpoint " + path);
    return matched;
}

// ---- full runs ----

Rng view_rng(int64_t run_seed, const std::string& sample_id, int64_t epoch) {
    return Rng(uint64_t(run_seed)).fork("views").fork(sample_id).fork(uint64_t(epoch));
}

namespace {

std::string format_metrics_line(int64_t step, int64_t epoch, double lr, const StepStats& s) {
    char buf[640];
    std::snprintf(buf, sizeof buf,
                  "{\"step\":%lld,\"epoch\":%lld,\"lr\":%.10g,\"loss_total\":%.10g,"
                  "\"loss_anatomy\":%.10g,\"loss_morpho\":%.10g,\"loss_radiomics\":%.10g,"
                  "\"loss_rot\":%.10g,\"loss_loc\":%.10g,\"loss_mim\":%.10g,"
                  "\"loss_contrast\":%.10g,\"acc_rot\":%.10g,\"acc_loc\":%.10g}",
                  (long long)step, (long long)epoch, lr, s.report.total, s.report.anatomy,
                  s.report.morpho, s.report.radiomics, s.report.rot, s.report.loc, s.report.mim,
                  s.report.contrast, s.acc_rot, s.acc_loc);
    return buf;
}

}  // namespace

PretrainResult run_pretraining(const cfg::RunConfig& cfg, const std::vector<vol::Sample>& samples,
                               const std::string& out_dir, const StepCallback& callback,
                               const std::string& resume_path) {
    const int batch_size = cfg.optim.batch_size;
    if (int(samples.size()) < batch_size)
        throw std::invalid_argument("run_pretraining: fewer samples than batch size");
    if (cfg.head_dims.num_regions < cfg.data.regions)
        throw ConfigError("model.num_regions smaller than data.regions");

    std::filesystem::create_directories(out_dir);
    cfg::write_resolved(cfg, out_dir);

    Model model = Model::build(cfg, uint64_t(cfg.seed));
    AdamW opt(model.store, cfg.optim);
    Rng run_rng = Rng(uint64_t(cfg.seed)).fork("run");

    int64_t start_step = 0;
    if (!resume_path.empty()) {
        const CheckpointMeta meta = load_checkpoint(model, &opt, resume_path);
        start_step = meta.step;
        run_rng = Rng::from_state(meta.rng_state);
    }

    const int64_t steps_per_epoch = int64_t(samples.size()) / batch_size;
    const int64_t total_steps = cfg.optim.max_steps > 0
                                    ? cfg.optim.max_steps
                                    : int64_t(cfg.optim.total_epochs) * steps_per_epoch;

    const std::string metrics_path = out_dir + "/metrics.jsonl";
    std::ofstream metrics(metrics_path,
                          resume_path.empty() ? std::ios::trunc : std::ios::app);
    if (!metrics) throw std::runtime_error("cannot write metrics: " + metrics_path);

    std::vector<size_t> order(samples.size());
    int64_t order_epoch = -1;

    PretrainResult result;
    result.metrics_path = metrics_path;
    result.checkpoint_path = out_dir + "/checkpoint.dmtc";

    int64_t step = start_step;
    for (; step < total_steps; ++step) {
        const int64_t epoch = step / steps_per_epoch;
        const int64_t pos = step % steps_per_epoch;
        if (epoch != order_epoch) {
            for (size_t i = 0; i < order.size(); ++i) order[i] = i;
            Rng erng = Rng(uint64_t(cfg.seed)).fork("order").fork(uint64_t(epoch));
            erng.shuffle(order);
            order_epoch = epoch;
        }

        std::vector<aug::ViewSet> batch{size_t(batch_size)};
        const int workers = std::max(1, cfg.runtime.workers);
        auto build_one = [&](int b) {
            const auto& sample = samples[order[size_t(pos * batch_size + b)]];
            Rng vr = view_rng(cfg.seed, sample.sample_id, epoch);
            batch[size_t(b)] = aug::build_views(sample, vr, cfg.augment);
        };
        if (workers > 1) {
            std::vector<std::thread> threads;
            for (int b = 0; b < batch_size; ++b) threads.emplace_back(build_one, b);
            for (auto& t : threads) t.join();
        } else {
            for (int b = 0; b < batch_size; ++b) build_one(b);
        }

        const double lr = lr_at_step(step, cfg.optim, total_steps);
        StepStats stats;
        try {
            stats = train_step(model, batch, cfg.weights, cfg.tasks, opt, lr);
        } catch (const std::runtime_error& e) {
            throw std::runtime_error(std::string(e.what()) + " at step " + std::to_string(step));
        }
        metrics << format_metrics_line(step, epoch, lr, stats) << "\n";
        metrics.flush();

        if (cfg.optim.checkpoint_interval > 0 && (step + 1) % cfg.optim.checkpoint_interval == 0) {
            CheckpointMeta meta{step + 1, (step + 1) / steps_per_epoch, run_rng.state(),
                                cfg.to_json()};
            save_checkpoint(model, opt, meta,
                            out_dir + "/checkpoint-step" + std::to_string(step + 1) + ".dmtc");
        }
        if (callback && !callback(stats, step)) {
            ++step;
            break;
        }
    }

    CheckpointMeta meta{step, steps_per_epoch > 0 ? step / steps_per_epoch : 0, run_rng.state(),
                        cfg.to_json()};
    save_checkpoint(model, opt, meta, result.checkpoint_path);
    result.steps = step;
    return result;
}

}  // namespace damt::train
