#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "arbiter/rir_engine.hpp"
#include "arbiter/scene_sampler.hpp"
#include "arbiter/trainer.hpp"

namespace arbiter::harness {

struct AudioConfig {
    double duration_s = 2.0;
    bool packed = false; // one multi-channel WAV per scenario instead of per-device files

    void validate() const;
};

/// The full run configuration: scene sampling, synthesis, model, training,
/// and the sweep grid. Loadable from JSON where every missing field keeps
/// its built-in default.
struct RunConfig {
    scene::SamplingConfig sampling;
    rir::RirParams rir;
    AudioConfig audio;
    std::string model_preset = "small"; // small | deep | tiny
    nn::ModelConfig model;
    TrainingConfig pretrain;
    TrainingConfig finetune;

    long total_scenarios = 200;
    long test_scenarios = 100;
    std::vector<int> subset_exponents{0, 1, 2, 3};
    std::vector<std::string> setups{"baseline", "contrastive"};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::uint64_t data_seed = 1234;
    std::string out_dir = "runs/default";

    void validate() const;
};

RunConfig default_run_config();
RunConfig load_run_config(const std::string& path);
void save_run_config(const std::string& path, const RunConfig& config);

std::string model_config_to_json(const nn::ModelConfig& config);
nn::ModelConfig model_config_from_json(const std::string& json_text);

/// s_i = floor(S / 4^i); errors out when any size reaches zero.
std::vector<long> subset_sizes(long total, const std::vector<int>& exponents);

/// Fixed seeded shuffle; subsets are nested prefixes of this order.
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

/// Worker count for data generation: ARBITER_WORKERS env var, else hardware
/// concurrency.
int worker_count();

struct DatasetPaths {
    std::string scenes_train, scenes_test;
    std::string manifest_train, manifest_test;
    std::string audio_train_dir, audio_test_dir;
    std::string checkpoints_dir, evals_dir, report_dir;
};
DatasetPaths dataset_paths(const std::string& out_dir);

/// Samples the train and test scene pools (disjoint seed streams) and writes
/// both scene manifests.
void generate_scenes(const RunConfig& config, const std::string& out_dir);

/// Renders every scene to device WAVs plus a dataset manifest; parallel
/// across scenarios, deterministic independent of scheduling.
void generate_audio(const RunConfig& config, const std::string& out_dir);

/// Writes the feature cache for both splits.
void featurize_dataset(const RunConfig& config, const std::string& out_dir);

struct PretrainOutcome {
    std::string checkpoint_path;
    TrainResult result;
};
PretrainOutcome run_pretrain(const RunConfig& config, const std::string& setup,
                             std::uint64_t seed, const std::string& out_dir);

struct FinetuneOutcome {
    std::string checkpoint_path;
    TrainResult result;
    long subset_size = 0;
};
FinetuneOutcome run_finetune(const RunConfig& config, const std::string& setup, int subset_exp,
                             std::uint64_t seed, const std::string& out_dir);

/// Loads the finetuned checkpoint, evaluates on the held-out test set, and
/// writes the eval JSON. Returns the accuracy.
double run_evaluate(const RunConfig& config, const std::string& setup, int subset_exp,
                    std::uint64_t seed, const std::string& out_dir);

struct ReportCell {
    std::string setup;
    long subset_size = 0;
    int subset_exp = 0;
    std::uint64_t seed = 0;
    double accuracy = 0.0;
    double relative_error_rate = 0.0;
    std::string checkpoint_path;
    std::vector<TrainCurvePoint> curve;
};

struct Report {
    std::vector<ReportCell> cells;
};

/// Executes every (setup x subset x seed) cell, generating data if missing,
/// computes relative error rates against the baseline smallest-subset cell
/// of the same seed, and writes report.csv / report.svg / report.json.
Report run_sweep(const RunConfig& config);

/// Builds the report from previously written eval JSONs (the CLI `report`
/// path). Errors out when the baseline smallest-subset cells are missing.
Report assemble_report(const RunConfig& config, const std::string& out_dir);

void write_report_csv(const std::string& path, const Report& report);
void write_report_svg(const std::string& path, const Report& report);
void write_report_json(const std::string& path, const Report& report);

} // namespace arbiter::harness
