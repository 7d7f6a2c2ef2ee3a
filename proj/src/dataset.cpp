#include "damt/dataset.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "damt/common.hpp"
#include "damt/rng.hpp"

namespace damt::data {

namespace {

std::string sample_name(int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "sample_%03d", i);
    return buf;
}

struct RawDataset {
    std::vector<vol::Sample> samples;  // radiomics still raw
    DatasetLabels labels;
};

// Bright spherical marker at the support centre; +3 in z-scored units makes
// the class visible in image content rather than per-sample identity.
void add_marker(vol::Sample& s) {
    const auto [origin, shape] = vol::support_bbox(s.parcellation);
    const double cz = origin[0] + shape[0] / 2.0, cy = origin[1] + shape[1] / 2.0,
                 cx = origin[2] + shape[2] / 2.0;
    const double radius = 0.18 * std::min({shape[0], shape[1], shape[2]});
    for (int64_t z = 0; z < s.volume.shape[0]; ++z)
        for (int64_t y = 0; y < s.volume.shape[1]; ++y)
            for (int64_t x = 0; x < s.volume.shape[2]; ++x) {
                const double dz = z - cz, dy = y - cy, dx = x - cx;
                if (dz * dz + dy * dy + dx * dx <= radius * radius) s.volume.at(z, y, x) += 3.0f;
            }
}

RawDataset build_raw(int count, int size, int regions, uint64_t seed, double marked_fraction) {
    RawDataset ds;
    Rng rng = Rng(seed).fork("dataset");
    std::vector<size_t> idx(size_t(count), 0);
    for (int i = 0; i < count; ++i) idx[size_t(i)] = size_t(i);
    rng.shuffle(idx);
    const int n_marked = int(std::llround(marked_fraction * count));

    for (int i = 0; i < count; ++i) {
        vol::Sample s = vol::generate_phantom(seed + uint64_t(i) * 1000003ULL, size, regions);
        s.sample_id = sample_name(i);
        bool marked = false;
        for (int f = 0; f < n_marked; ++f)
            if (idx[size_t(f)] == size_t(i)) marked = true;
        if (marked) add_marker(s);
        ds.labels.class_of[s.sample_id] = marked ? 1 : 0;
        ds.labels.value_of[s.sample_id] = double(regions);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

}  // namespace

Dataset make_dataset(int count, int size, int regions, uint64_t seed, double marked_fraction) {
    RawDataset raw = build_raw(count, size, regions, seed, marked_fraction);
    std::vector<std::vector<double>> vectors;
    for (const auto& s : raw.samples) vectors.push_back(s.radiomics.values);
    Dataset ds;
    ds.stats = rad::compute_corpus_stats(vectors);
    for (auto& s : raw.samples) {
        s.radiomics.values = rad::zscore(s.radiomics.values, ds.stats);
        ds.samples.push_back(std::move(s));
    }
    ds.labels = std::move(raw.labels);
    return ds;
}

Dataset make_mixed_regions_dataset(int count, int size, const std::vector<int>& region_counts,
                                   uint64_t seed) {
    Dataset ds;
    std::vector<std::vector<double>> vectors;
    std::vector<vol::Sample> raw;
    for (int i = 0; i < count; ++i) {
        const int k = region_counts[size_t(i) % region_counts.size()];
        vol::Sample s = vol::generate_phantom(seed + uint64_t(i) * 1000003ULL, size, k);
        s.sample_id = sample_name(i);
        ds.labels.class_of[s.sample_id] = 0;
        ds.labels.value_of[s.sample_id] = double(k);
        vectors.push_back(s.radiomics.values);
        raw.push_back(std::move(s));
    }
    ds.stats = rad::compute_corpus_stats(vectors);
    for (auto& s : raw) {
        s.radiomics.values = rad::zscore(s.radiomics.values, ds.stats);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

void generate_dataset(const std::string& dir, int count, int size, int regions, uint64_t seed,
                      double marked_fraction) {
    std::filesystem::create_directories(dir);
    RawDataset raw = build_raw(count, size, regions, seed, marked_fraction);

    std::vector<std::vector<double>> vectors;
    for (const auto& s : raw.samples) vectors.push_back(s.radiomics.values);
    const rad::CorpusStats stats = rad::compute_corpus_stats(vectors);
    rad::save_stats(stats, dir + "/radiomics_stats.json");

    nlohmann::ordered_json targets;
    targets["samples"] = nlohmann::ordered_json::array();
    for (const auto& s : raw.samples) {
        vol::write_volume(s.volume, dir + "/" + s.sample_id + ".vol.dvol");
        vol::write_labels(s.parcellation, dir + "/" + s.sample_id + ".lab.dvol");
        nlohmann::ordered_json e;
        e["sample_id"] = s.sample_id;
        e["morphology"] = s.morphology.values;
        e["morphology_region_ids"] = s.morphology.region_ids;
        e["radiomics_raw"] = s.radiomics.values;
        e["tissue_group"] = s.radiomics.tissue_group;
        e["class"] = raw.labels.class_of.at(s.sample_id);
        e["regions"] = regions;
        targets["samples"].push_back(e);
    }
    std::ofstream f(dir + "/targets.json", std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write targets.json in " + dir);
    f << targets.dump(2) << "\n";
}

Dataset load_dataset(const std::string& dir) {
    std::ifstream f(dir + "/targets.json");
    if (!f) throw FormatError("missing targets.json in " + dir);
    nlohmann::json targets;
    f >> targets;

    Dataset ds;
    ds.stats = rad::load_stats(dir + "/radiomics_stats.json");
    for (const auto& e : targets.at("samples")) {
        vol::Sample s;
        s.sample_id = e.at("sample_id").get<std::string>();
        s.volume = vol::read_volume(dir + "/" + s.sample_id + ".vol.dvol");
        s.parcellation = vol::read_labels(dir + "/" + s.sample_id + ".lab.dvol");
        s.morphology.values = e.at("morphology").get<std::vector<double>>();
        s.morphology.region_ids = e.at("morphology_region_ids").get<std::vector<int>>();
        s.radiomics.values =
            rad::zscore(e.at("radiomics_raw").get<std::vector<double>>(), ds.stats);
        s.radiomics.tissue_group = e.at("tissue_group").get<std::vector<int>>();
        ds.labels.class_of[s.sample_id] = e.at("class").get<int>();
        ds.labels.value_of[s.sample_id] = double(e.at("regions").get<int>());
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

}  // namespace damt::data
