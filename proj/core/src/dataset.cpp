#include "arbiter/dataset.hpp"

#include <filesystem>

#include "arbiter/errors.hpp"

namespace arbiter::harness {

namespace fs = std::filesystem;

ScenarioDataset::ScenarioDataset(const std::string& manifest_path) {
    const fs::path p(manifest_path);
    dir_ = p.parent_path().string();
    if (dir_.empty()) dir_ = ".";
    manifest_stem_ = p.stem().string();
    records_ = io::read_dataset_manifest(manifest_path);
}

LabeledScenario ScenarioDataset::labeled(std::size_t i) const {
    const io::ScenarioRecord& r = record(i);
    return {r.id, io::load_record_audio(r, dir_), r.label};
}

UnlabeledScenario ScenarioDataset::unlabeled(std::size_t i) const {
    const io::ScenarioRecord& r = record(i);
    return {r.id, io::load_record_audio(r, dir_)};
}

std::string ScenarioDataset::feature_cache_dir() const {
    return (fs::path(dir_) / (manifest_stem_ + "_features")).string();
}

std::string ScenarioDataset::feature_cache_path(std::size_t i, int device) const {
    char name[64];
    std::snprintf(name, sizeof name, "scn_%08llu_d%d.feat",
                  static_cast<unsigned long long>(record(i).id), device);
    return (fs::path(feature_cache_dir()) / name).string();
}

std::vector<feat::FeatureMatrix> ScenarioDataset::features(std::size_t i) const {
    const io::ScenarioRecord& r = record(i);
    const int n_devices = static_cast<int>(r.scene.device_positions.size());

    bool cached = true;
    for (int d = 0; d < n_devices; ++d) {
        if (!fs::exists(feature_cache_path(i, d))) {
            cached = false;
            break;
        }
    }
    std::vector<feat::FeatureMatrix> out;
    out.reserve(static_cast<std::size_t>(n_devices));
    if (cached) {
        for (int d = 0; d < n_devices; ++d) {
            out.push_back(io::read_feature_file(feature_cache_path(i, d)));
        }
        return out;
    }
    const std::vector<audio::Waveform> waves = io::load_record_audio(r, dir_);
    for (const auto& w : waves) out.push_back(feat::normalize(feat::lfbe(w)));
    return out;
}

} // namespace arbiter::harness
