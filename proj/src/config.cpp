#include "damt/config.hpp"

#include <filesystem>
#include <fstream>

#include "damt/common.hpp"

namespace damt::cfg {

using nlohmann::ordered_json;

nlohmann::ordered_json RunConfig::to_json() const {
    ordered_json j;
    j["seed"] = seed;
    j["output_dir"] = output_dir;
    j["runtime"] = {{"workers", runtime.workers}};
    j["data"] = {{"count", data.count},
                 {"size", data.size},
                 {"regions", data.regions},
                 {"levels", data.levels}};
    j["augment"] = {{"global_size", augment.global_size},
                    {"local_crop", augment.local_crop},
                    {"local_size", augment.local_size},
                    {"num_local", augment.num_local},
                    {"mask_patch", augment.mask_patch},
                    {"mask_ratio", augment.mask_ratio},
                    {"sub_patch_size", augment.sub_patch_size},
                    {"max_gap", augment.max_gap},
                    {"jitter_scale", augment.jitter_scale},
                    {"jitter_shift", augment.jitter_shift}};
    j["model"] = {{"patch_size", model.patch_size},
                  {"embed_dim", model.embed_dim},
                  {"depths", model.depths},
                  {"num_heads", model.num_heads},
                  {"window", model.window},
                  {"mlp_ratio", model.mlp_ratio},
                  {"contrastive_dim", model.contrastive_dim},
                  {"decoder_channels", model.decoder_channels},
                  {"num_regions", head_dims.num_regions},
                  {"morphology_regions", head_dims.morphology_regions}};
    j["losses"] = {{"lambda1", weights.lambda1},
                   {"lambda2", weights.lambda2},
                   {"lambda3", weights.lambda3},
                   {"lambda4", weights.lambda4},
                   {"lambda5", weights.lambda5},
                   {"lambda6", weights.lambda6},
                   {"lambda7", weights.lambda7},
                   {"tau", weights.tau},
                   {"region_sum", weights.region_sum},
                   {"enable_anatomy", tasks.anatomy},
                   {"enable_morphology", tasks.morphology},
                   {"enable_radiomics", tasks.radiomics},
                   {"enable_rotation", tasks.rotation},
                   {"enable_location", tasks.location},
                   {"enable_mim", tasks.mim},
                   {"enable_contrastive", tasks.contrastive}};
    j["optim"] = {{"base_lr", optim.base_lr},
                  {"beta1", optim.beta1},
                  {"beta2", optim.beta2},
                  {"weight_decay", optim.weight_decay},
                  {"warmup_steps", optim.warmup_steps},
                  {"total_epochs", optim.total_epochs},
                  {"batch_size", optim.batch_size},
                  {"max_steps", optim.max_steps},
                  {"checkpoint_interval", optim.checkpoint_interval}};
    j["downstream"] = {{"lr", downstream.lr},
                       {"epochs", downstream.epochs},
                       {"folds", downstream.folds},
                       {"batch_size", downstream.batch_size},
                       {"input_size", downstream.input_size}};
    return j;
}

namespace {

std::string type_name(const ordered_json& v) {
    if (v.is_boolean()) return "boolean";
    if (v.is_number()) return "number";
    if (v.is_string()) return "string";
    if (v.is_array()) return "array";
    if (v.is_object()) return "object";
    return "null";
}

bool type_compatible(const ordered_json& expected, const ordered_json& got) {
    if (expected.is_boolean()) return got.is_boolean();
    if (expected.is_number()) return got.is_number();
    if (expected.is_string()) return got.is_string();
    if (expected.is_array()) return got.is_array();
    if (expected.is_object()) return got.is_object();
    return false;
}

// Recursively validate `given` against the default skeleton and merge.
void merge_validated(ordered_json& base, const ordered_json& given, const std::string& prefix) {
    for (const auto& [key, value] : given.items()) {
        const std::string path = prefix.empty() ? key : prefix + "." + key;
        if (!base.contains(key)) throw ConfigError("unknown key " + path);
        if (!type_compatible(base[key], value))
            throw ConfigError("type mismatch for key " + path + " (expected " +
                              type_name(base[key]) + ", got " + type_name(value) + ")");
        if (base[key].is_object()) {
            merge_validated(base[key], value, path);
        } else {
            base[key] = value;
        }
    }
}

// Set a dotted key ("losses.tau") from a raw CLI string value.
void apply_override(ordered_json& base, const std::string& dotted, const std::string& raw) {
    ordered_json* cur = &base;
    std::string rest = dotted;
    while (true) {
        const size_t dot = rest.find('.');
        const std::string key = rest.substr(0, dot);
        if (!cur->contains(key)) throw ConfigError("unknown key " + dotted);
        if (dot == std::string::npos) {
            ordered_json parsed;
            try {
                parsed = ordered_json::parse(raw);
            } catch (...) {
                parsed = raw;  // unquoted strings
            }
            if (!type_compatible((*cur)[key], parsed))
                throw ConfigError("type mismatch for key " + dotted + " (expected " +
                                  type_name((*cur)[key]) + ", got " + type_name(parsed) + ")");
            (*cur)[key] = parsed;
            return;
        }
        cur = &(*cur)[key];
        if (!cur->is_object()) throw ConfigError("unknown key " + dotted);
        rest = rest.substr(dot + 1);
    }
}

}  // namespace

RunConfig config_from_json(const ordered_json& j) {
    RunConfig c;
    c.seed = j.at("seed").get<int64_t>();
    c.output_dir = j.at("output_dir").get<std::string>();
    c.runtime.workers = j.at("runtime").at("workers").get<int>();
    const auto& d = j.at("data");
    c.data = {d.at("count").get<int>(), d.at("size").get<int>(), d.at("regions").get<int>(),
              d.at("levels").get<int>()};
    const auto& a = j.at("augment");
    c.augment.global_size = a.at("global_size").get<int>();
    c.augment.local_crop = a.at("local_crop").get<int>();
    c.augment.local_size = a.at("local_size").get<int>();
    c.augment.num_local = a.at("num_local").get<int>();
    c.augment.mask_patch = a.at("mask_patch").get<int>();
    c.augment.mask_ratio = a.at("mask_ratio").get<double>();
    c.augment.sub_patch_size = a.at("sub_patch_size").get<int>();
    c.augment.max_gap = a.at("max_gap").get<int>();
    c.augment.jitter_scale = a.at("jitter_scale").get<double>();
    c.augment.jitter_shift = a.at("jitter_shift").get<double>();
    const auto& m = j.at("model");
    c.model.patch_size = m.at("patch_size").get<int>();
    c.model.embed_dim = m.at("embed_dim").get<int>();
    c.model.depths = m.at("depths").get<std::vector<int>>();
    c.model.num_heads = m.at("num_heads").get<std::vector<int>>();
    c.model.window = m.at("window").get<int>();
    c.model.mlp_ratio = m.at("mlp_ratio").get<int>();
    c.model.contrastive_dim = m.at("contrastive_dim").get<int>();
    c.model.decoder_channels = m.at("decoder_channels").get<std::vector<int>>();
    c.head_dims.num_regions = m.at("num_regions").get<int>();
    c.head_dims.morphology_regions = m.at("morphology_regions").get<int>();
    c.head_dims.radiomics_dim = 72;
    const auto& l = j.at("losses");
    c.weights.lambda1 = l.at("lambda1").get<double>();
    c.weights.lambda2 = l.at("lambda2").get<double>();
    c.weights.lambda3 = l.at("lambda3").get<double>();
    c.weights.lambda4 = l.at("lambda4").get<double>();
    c.weights.lambda5 = l.at("lambda5").get<double>();
    c.weights.lambda6 = l.at("lambda6").get<double>();
    c.weights.lambda7 = l.at("lambda7").get<double>();
    c.weights.tau = l.at("tau").get<double>();
    c.weights.region_sum = l.at("region_sum").get<bool>();
    c.tasks.anatomy = l.at("enable_anatomy").get<bool>();
    c.tasks.morphology = l.at("enable_morphology").get<bool>();
    c.tasks.radiomics = l.at("enable_radiomics").get<bool>();
    c.tasks.rotation = l.at("enable_rotation").get<bool>();
    c.tasks.location = l.at("enable_location").get<bool>();
    c.tasks.mim = l.at("enable_mim").get<bool>();
    c.tasks.contrastive = l.at("enable_contrastive").get<bool>();
    const auto& o = j.at("optim");
    c.optim.base_lr = o.at("base_lr").get<double>();
    c.optim.beta1 = o.at("beta1").get<double>();
    c.optim.beta2 = o.at("beta2").get<double>();
    c.optim.weight_decay = o.at("weight_decay").get<double>();
    c.optim.warmup_steps = o.at("warmup_steps").get<int>();
    c.optim.total_epochs = o.at("total_epochs").get<int>();
    c.optim.batch_size = o.at("batch_size").get<int>();
    c.optim.max_steps = o.at("max_steps").get<int>();
    c.optim.checkpoint_interval = o.at("checkpoint_interval").get<int>();
    const auto& ds = j.at("downstream");
    c.downstream.lr = ds.at("lr").get<double>();
    c.downstream.epochs = ds.at("epochs").get<int>();
    c.downstream.folds = ds.at("folds").get<int>();
    c.downstream.batch_size = ds.at("batch_size").get<int>();
    c.downstream.input_size = ds.at("input_size").get<int>();
    return c;
}

RunConfig parse_config(const std::string& path,
                       const std::vector<std::pair<std::string, std::string>>& overrides) {
    ordered_json base = RunConfig{}.to_json();
    if (!path.empty()) {
        std::ifstream f(path);
        if (!f) throw ConfigError("cannot open config file: " + path);
        ordered_json given;
        try {
            f >> given;
        } catch (const std::exception& e) {
            throw ConfigError("config is not valid JSON: " + std::string(e.what()));
        }
        if (!given.is_object()) throw ConfigError("config root must be a JSON object");
        merge_validated(base, given, "");
    }
    for (const auto& [key, value] : overrides) apply_override(base, key, value);
    return config_from_json(base);
}

void write_resolved(const RunConfig& cfg, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::ofstream f(out_dir + "/config.resolved.json", std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write resolved config in " + out_dir);
    f << cfg.to_json().dump(2) << "\n";
}

}  // namespace damt::cfg
