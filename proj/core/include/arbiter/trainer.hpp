#pragma once

#include <functional>
#include <string>
#include <vector>

#include "arbiter/dataset.hpp"
#include "arbiter/neural_core.hpp"

namespace arbiter::harness {

struct TrainingConfig {
    int steps = 400;
    int batch_scenarios = 4; // gradient accumulation per optimizer step
    double lr = 1e-3;
    double lr_min = 1e-5; // cosine decay floor
    double val_fraction = 0.1;
    int checkpoint_interval = 20; // validation cadence in steps
    int max_val_scenarios = 48;
    double split_epsilon = 0.05; // contrastive jitter
    double lambda = 0.5;         // combo weight

    void validate() const;
};

enum class PretrainSetup { contrastive, reconstructive, combo };

PretrainSetup pretrain_setup_from_string(const std::string& name);
std::string to_string(PretrainSetup setup);

struct TrainCurvePoint {
    long step = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    // Populated for the combo objective so the combination can be audited.
    double val_contrastive = 0.0;
    double val_reconstructive = 0.0;
};

struct TrainResult {
    long best_step = 0;
    double best_val_loss = 0.0;
    double initial_val_loss = 0.0;
    std::vector<TrainCurvePoint> curve;
};

/// Optimizes the chosen self-supervised objective over unlabeled scenarios.
/// The model is left holding the parameters of the lowest-validation
/// checkpoint. Throws TrainingError on a non-finite loss.
TrainResult pretrain_model(nn::PretrainModel& model, PretrainSetup setup,
                           const UnlabeledView& train, const UnlabeledView& val,
                           const TrainingConfig& cfg, std::uint64_t seed);

/// End-to-end cross-entropy finetuning; best checkpoint by lowest validation
/// loss. steps == 0 returns the initialization unchanged.
TrainResult finetune_model(nn::ClassifierModel& model, const ScenarioDataset& dataset,
                           const std::vector<std::size_t>& train_indices,
                           const std::vector<std::size_t>& val_indices,
                           const TrainingConfig& cfg, std::uint64_t seed);

/// Fraction of scenarios whose argmax probability matches the label.
double evaluate_accuracy(const nn::ClassifierModel& model, const ScenarioDataset& dataset,
                         const std::vector<std::size_t>& indices);

/// Evaluation core against an arbitrary predictor (index -> predicted label);
/// lets tests drive the accuracy bookkeeping with oracle stubs.
struct EvalItem {
    int label = 0;
    int n_devices = 2;
};
double evaluate_with(const std::function<int(const EvalItem&, std::size_t)>& predictor,
                     const std::vector<EvalItem>& items);

} // namespace arbiter::harness
