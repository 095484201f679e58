#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "arbiter/feature_pipeline.hpp"
#include "arbiter/manifest.hpp"

namespace arbiter::harness {

struct LabeledScenario {
    std::uint64_t id = 0;
    std::vector<audio::Waveform> device_waveforms;
    int label = -1;
};

/// Label-free scenario view handed to pretraining; the type carries no label.
struct UnlabeledScenario {
    std::uint64_t id = 0;
    std::vector<audio::Waveform> device_waveforms;
};

/// Manifest-backed dataset. Audio is read on demand; features are computed
/// on the fly, or read from the sibling feature cache when it exists.
class ScenarioDataset {
public:
    ScenarioDataset() = default;
    explicit ScenarioDataset(const std::string& manifest_path);

    std::size_t size() const { return records_.size(); }
    const io::ScenarioRecord& record(std::size_t i) const { return records_.at(i); }

    LabeledScenario labeled(std::size_t i) const;
    UnlabeledScenario unlabeled(std::size_t i) const;

    /// Normalized LFBE per device. Uses the feature cache when present.
    std::vector<feat::FeatureMatrix> features(std::size_t i) const;

    /// Where featurize writes / features() looks for cached matrices.
    std::string feature_cache_dir() const;
    std::string feature_cache_path(std::size_t i, int device) const;

    const std::string& directory() const { return dir_; }

private:
    std::string dir_;
    std::string manifest_stem_;
    std::vector<io::ScenarioRecord> records_;
};

/// The only handle pretraining receives: label access does not exist here.
class UnlabeledView {
public:
    UnlabeledView(const ScenarioDataset& dataset, std::vector<std::size_t> indices)
        : dataset_(&dataset), indices_(std::move(indices)) {}

    std::size_t size() const { return indices_.size(); }
    UnlabeledScenario get(std::size_t i) const { return dataset_->unlabeled(indices_.at(i)); }

private:
    const ScenarioDataset* dataset_;
    std::vector<std::size_t> indices_;
};

} // namespace arbiter::harness
