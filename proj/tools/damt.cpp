// Command-line entry point: phantom generation, pretraining, fine-tuning,
// evaluation, label-fraction sweeps, radiomics extraction, checkpoint
// inspection.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "damt/common.hpp"
#include "damt/config.hpp"
#include "damt/dataset.hpp"
#include "damt/downstream.hpp"
#include "damt/pretrain.hpp"

namespace {

using namespace damt;

// remaining "--section.key value" pairs become config overrides
std::vector<std::pair<std::string, std::string>> parse_overrides(
    const std::vector<std::string>& extras) {
    std::vector<std::pair<std::string, std::string>> overrides;
    for (size_t i = 0; i < extras.size(); ++i) {
        const std::string& arg = extras[i];
        if (arg.rfind("--", 0) != 0 || arg.find('.') == std::string::npos)
            throw ConfigError("unrecognized argument: " + arg);
        if (i + 1 >= extras.size()) throw ConfigError("missing value for override " + arg);
        overrides.emplace_back(arg.substr(2), extras[i + 1]);
        ++i;
    }
    return overrides;
}

std::vector<double> labels_for(const data::Dataset& ds, const std::string& key) {
    std::vector<double> labels;
    for (const auto& s : ds.samples) {
        if (key == "class")
            labels.push_back(double(ds.labels.class_of.at(s.sample_id)));
        else if (key == "regions")
            labels.push_back(ds.labels.value_of.at(s.sample_id));
        else
            throw ConfigError("unknown label key: " + key + " (use class|regions)");
    }
    return labels;
}

nlohmann::ordered_json metricset_json(const down::MetricSet& ms) {
    nlohmann::ordered_json j;
    j["folds"] = nlohmann::ordered_json::array();
    for (const auto& f : ms.folds) {
        if (ms.classification)
            j["folds"].push_back({{"acc", f.acc}, {"auc", f.auc}});
        else
            j["folds"].push_back({{"mae", f.mae}, {"r2", f.r2}});
    }
    if (ms.classification)
        j["mean"] = {{"acc", ms.mean.acc}, {"auc", ms.mean.auc}};
    else
        j["mean"] = {{"mae", ms.mean.mae}, {"r2", ms.mean.r2}};
    return j;
}

int run(int argc, char** argv) {
    CLI::App app{"domain-aware multi-task 3D pretraining toolkit"};
    app.require_subcommand(1);

    // phantom
    auto* cmd_phantom = app.add_subcommand("phantom", "generate a synthetic phantom dataset");
    std::string ph_out;
    int ph_count = 16, ph_size = 64, ph_regions = 8;
    int64_t ph_seed = 7;
    double ph_marked = 0.0;
    cmd_phantom->add_option("--out", ph_out, "output directory")->required();
    cmd_phantom->add_option("--count", ph_count, "number of samples");
    cmd_phantom->add_option("--size", ph_size, "voxels per side");
    cmd_phantom->add_option("--regions", ph_regions, "Voronoi regions K");
    cmd_phantom->add_option("--seed", ph_seed, "generator seed");
    cmd_phantom->add_option("--marked-fraction", ph_marked,
                            "fraction of samples given a bright central marker (class 1)");

    // pretrain
    auto* cmd_pretrain = app.add_subcommand("pretrain", "run multi-task pretraining");
    std::string pt_config, pt_data, pt_out, pt_resume;
    cmd_pretrain->add_option("--config", pt_config, "JSON config file");
    cmd_pretrain->add_option("--data", pt_data, "phantom dataset directory")->required();
    cmd_pretrain->add_option("--out", pt_out, "run output directory")->required();
    cmd_pretrain->add_option("--resume", pt_resume, "checkpoint to resume from");
    cmd_pretrain->allow_extras();

    // finetune
    auto* cmd_finetune = app.add_subcommand("finetune", "fine-tune on a labeled dataset");
    std::string ft_config, ft_data, ft_ckpt, ft_task = "classify", ft_label = "class", ft_out;
    cmd_finetune->add_option("--config", ft_config, "JSON config file");
    cmd_finetune->add_option("--data", ft_data, "dataset directory")->required();
    cmd_finetune->add_option("--checkpoint", ft_ckpt, "pretrained checkpoint (omit for scratch)");
    cmd_finetune->add_option("--task", ft_task, "classify|regress");
    cmd_finetune->add_option("--label-key", ft_label, "class|regions");
    cmd_finetune->add_option("--out", ft_out, "output directory")->required();
    cmd_finetune->allow_extras();

    // eval
    auto* cmd_eval = app.add_subcommand("eval", "compute metrics from a scores file");
    std::string ev_scores, ev_task = "classify";
    cmd_eval->add_option("--scores", ev_scores,
                         "JSON array of {\"score\": [...], \"label\": y}")->required();
    cmd_eval->add_option("--task", ev_task, "classify|regress");

    // sweep
    auto* cmd_sweep = app.add_subcommand("sweep", "label-fraction sweep, pretrained vs scratch");
    std::string sw_config, sw_data, sw_ckpt, sw_task = "classify", sw_label = "class", sw_out;
    cmd_sweep->add_option("--config", sw_config, "JSON config file");
    cmd_sweep->add_option("--data", sw_data, "dataset directory")->required();
    cmd_sweep->add_option("--checkpoint", sw_ckpt, "pretrained checkpoint")->required();
    cmd_sweep->add_option("--task", sw_task, "classify|regress");
    cmd_sweep->add_option("--label-key", sw_label, "class|regions");
    cmd_sweep->add_option("--out", sw_out, "output directory")->required();
    cmd_sweep->allow_extras();

    // radiomics
    auto* cmd_rad = app.add_subcommand("radiomics", "emit per-sample radiomics target vectors");
    std::string rd_data, rd_out;
    cmd_rad->add_option("--data", rd_data, "dataset directory")->required();
    cmd_rad->add_option("--out", rd_out, "output directory")->required();

    // inspect
    auto* cmd_inspect = app.add_subcommand("inspect", "print a checkpoint manifest");
    std::string in_ckpt;
    cmd_inspect->add_option("--checkpoint", in_ckpt, "checkpoint file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << app.help() << "\nerror: " << e.what() << "\n";
        return 1;
    }

    if (cmd_phantom->parsed()) {
        data::generate_dataset(ph_out, ph_count, ph_size, ph_regions, uint64_t(ph_seed), ph_marked);
        std::cout << "wrote " << ph_count << " samples to " << ph_out << "\n";
        return 0;
    }

    if (cmd_pretrain->parsed()) {
        cfg::RunConfig cfg = cfg::parse_config(pt_config, parse_overrides(cmd_pretrain->remaining()));
        cfg.output_dir = pt_out;
        data::Dataset ds = data::load_dataset(pt_data);
        const auto result = train::run_pretraining(cfg, ds.samples, pt_out, {}, pt_resume);
        std::cout << "pretraining finished after " << result.steps << " steps\n"
                  << "checkpoint: " << result.checkpoint_path << "\n"
                  << "metrics: " << result.metrics_path << "\n";
        return 0;
    }

    if (cmd_finetune->parsed()) {
        cfg::RunConfig cfg = cfg::parse_config(ft_config, parse_overrides(cmd_finetune->remaining()));
        cfg.output_dir = ft_out;
        cfg::write_resolved(cfg, ft_out);
        data::Dataset ds = data::load_dataset(ft_data);
        const bool classify = ft_task == "classify";
        if (!classify && ft_task != "regress") throw ConfigError("task must be classify|regress");
        const auto ms = down::finetune_run(cfg, ds.samples, labels_for(ds, ft_label), classify,
                                           ft_ckpt);
        const auto j = metricset_json(ms);
        std::ofstream f(ft_out + "/metrics.json", std::ios::trunc);
        f << j.dump(2) << "\n";
        std::cout << j.dump(2) << "\n";
        return 0;
    }

    if (cmd_eval->parsed()) {
        std::ifstream f(ev_scores);
        if (!f) throw ConfigError("cannot open scores file: " + ev_scores);
        nlohmann::json j;
        f >> j;
        std::vector<std::vector<double>> scores;
        std::vector<double> labels;
        for (const auto& e : j) {
            if (e.at("score").is_array())
                scores.push_back(e.at("score").get<std::vector<double>>());
            else
                scores.push_back({e.at("score").get<double>()});
            labels.push_back(e.at("label").get<double>());
        }
        const bool classify = ev_task == "classify";
        const auto m = down::compute_metrics(scores, labels, classify);
        nlohmann::ordered_json out;
        if (classify)
            out = {{"acc", m.acc}, {"auc", m.auc}};
        else
            out = {{"mae", m.mae}, {"r2", m.r2}};
        std::cout << out.dump(2) << "\n";
        return 0;
    }

    if (cmd_sweep->parsed()) {
        cfg::RunConfig cfg = cfg::parse_config(sw_config, parse_overrides(cmd_sweep->remaining()));
        cfg.output_dir = sw_out;
        cfg::write_resolved(cfg, sw_out);
        data::Dataset ds = data::load_dataset(sw_data);
        const bool classify = sw_task == "classify";
        const auto rows = down::label_fraction_sweep(cfg, ds.samples, labels_for(ds, sw_label),
                                                     classify, sw_ckpt);
        std::filesystem::create_directories(sw_out);
        down::write_sweep_csv(rows, sw_out + "/sweep.csv");
        down::write_sweep_summary(rows, sw_out + "/summary.json");
        std::cout << "wrote " << rows.size() << " sweep rows to " << sw_out << "/sweep.csv\n";
        return 0;
    }

    if (cmd_rad->parsed()) {
        data::Dataset ds = data::load_dataset(rd_data);
        std::filesystem::create_directories(rd_out);
        rad::save_stats(ds.stats, rd_out + "/radiomics_stats.json");
        std::ofstream f(rd_out + "/radiomics.jsonl", std::ios::trunc);
        for (const auto& s : ds.samples) {
            nlohmann::ordered_json e;
            e["sample_id"] = s.sample_id;
            e["values"] = s.radiomics.values;
            f << e.dump() << "\n";
        }
        std::cout << "wrote " << ds.samples.size() << " records to " << rd_out
                  << "/radiomics.jsonl\n";
        return 0;
    }

    if (cmd_inspect->parsed()) {
        std::cout << train::read_manifest(in_ckpt).dump(2) << "\n";
        return 0;
    }

    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const CLI::ParseError&) {
        return 1;
    } catch (const damt::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
