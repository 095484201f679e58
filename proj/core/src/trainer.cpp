#include "arbiter/trainer.hpp"

#include <cmath>
#include <numbers>

#include "arbiter/errors.hpp"
#include "arbiter/objectives.hpp"

namespace arbiter::harness {

namespace {

struct StoreSnapshot {
    std::vector<nn::TensorData> params;
    std::vector<nn::TensorData> buffers;
};

StoreSnapshot take_snapshot(const nn::ParamStore& store) {
    StoreSnapshot s;
    s.params.reserve(store.params().size());
    for (const auto& p : store.params()) s.params.push_back(p->value);
    s.buffers.reserve(store.buffers().size());
    for (const auto& b : store.buffers()) s.buffers.push_back(b->value);
    return s;
}

void restore_snapshot(nn::ParamStore& store, const StoreSnapshot& s) {
    for (std::size_t i = 0; i < s.params.size(); ++i) store.params()[i]->value = s.params[i];
    for (std::size_t i = 0; i < s.buffers.size(); ++i) store.buffers()[i]->value = s.buffers[i];
}

double cosine_lr(const TrainingConfig& cfg, int step) {
    if (cfg.steps <= 1) return cfg.lr;
    const double t = static_cast<double>(step - 1) / static_cast<double>(cfg.steps - 1);
    return cfg.lr_min + 0.5 * (cfg.lr - cfg.lr_min) * (1.0 + std::cos(std::numbers::pi * t));
}

// Epoch-reshuffled index stream.
class IndexStream {
public:
    IndexStream(std::size_t n, rng::Generator& gen) : n_(n), gen_(gen) {
        indices_.resize(n);
        for (std::size_t i = 0; i < n; ++i) indices_[i] = i;
        reshuffle();
    }

    std::size_t next() {
        if (cursor_ >= n_) reshuffle();
        return indices_[cursor_++];
    }

private:
    void reshuffle() {
        for (std::size_t i = n_; i > 1; --i) {
            const auto j = static_cast<std::size_t>(gen_.uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(indices_[i - 1], indices_[j]);
        }
        cursor_ = 0;
    }

    std::size_t n_;
    rng::Generator& gen_;
    std::vector<std::size_t> indices_;
    std::size_t cursor_ = 0;
};

std::vector<feat::FeatureMatrix> featurize_devices(const std::vector<audio::Waveform>& waves) {
    std::vector<feat::FeatureMatrix> out;
    out.reserve(waves.size());
    for (const auto& w : waves) out.push_back(feat::normalize(feat::lfbe(w)));
    return out;
}

struct PretrainLossParts {
    nn::Variable total;
    double contrastive = 0.0;
    double reconstructive = 0.0;
};

PretrainLossParts pretrain_loss(nn::Graph& g, const nn::PretrainModel& model,
                                PretrainSetup setup, const UnlabeledScenario& scenario,
                                const TrainingConfig& cfg, rng::Generator& gen) {
    PretrainLossParts parts;
    const bool want_contrastive =
        setup == PretrainSetup::contrastive || setup == PretrainSetup::combo;
    const bool want_reconstructive =
        setup == PretrainSetup::reconstructive || setup == PretrainSetup::combo;

    nn::Variable lc, lr;
    if (want_contrastive) {
        const long len = static_cast<long>(scenario.device_waveforms.front().samples.size());
        const objectives::SplitSpec split = objectives::make_split(len, cfg.split_epsilon, gen);
        std::vector<nn::Variable> za, zb;
        za.reserve(scenario.device_waveforms.size());
        zb.reserve(scenario.device_waveforms.size());
        for (const auto& wave : scenario.device_waveforms) {
            const auto [first, second] = objectives::split_waveform(wave, split);
            za.push_back(model.embed(g, feat::normalize(feat::lfbe(first))));
            zb.push_back(model.embed(g, feat::normalize(feat::lfbe(second))));
        }
        lc = objectives::contrastive_loss(za, zb);
        parts.contrastive = lc.scalar();
    }
    if (want_reconstructive) {
        const auto feats = featurize_devices(scenario.device_waveforms);
        lr = objectives::reconstructive_loss(g, feats, model, gen);
        parts.reconstructive = lr.scalar();
    }

    switch (setup) {
        case PretrainSetup::contrastive: parts.total = lc; break;
        case PretrainSetup::reconstructive: parts.total = lr; break;
        case PretrainSetup::combo:
            parts.total = objectives::combo_loss(lr, lc, objectives::ObjectiveWeights{cfg.lambda});
            break;
    }
    return parts;
}

struct ValStats {
    double loss = 0.0;
    double contrastive = 0.0;
    double reconstructive = 0.0;
};

ValStats validate_pretrain(const nn::PretrainModel& model, PretrainSetup setup,
                           const UnlabeledView& val, const TrainingConfig& cfg,
                           std::uint64_t seed) {
    nn::NoGradGuard no_grad;
    // Fresh generator per pass: every validation sees the same splits and
    // partner draws, so checkpoint losses are comparable.
    rng::Generator val_gen(rng::derive_seed(seed, 0x7a11da7eull));
    nn::Graph g(/*training=*/false);
    const std::size_t count = std::min<std::size_t>(val.size(), static_cast<std::size_t>(cfg.max_val_scenarios));
    if (count == 0) throw Error("pretrain: empty validation set");
    ValStats stats;
    for (std::size_t i = 0; i < count; ++i) {
        const UnlabeledScenario scenario = val.get(i);
        const PretrainLossParts parts = pretrain_loss(g, model, setup, scenario, cfg, val_gen);
        stats.loss += parts.total.scalar();
        stats.contrastive += parts.contrastive;
        stats.reconstructive += parts.reconstructive;
    }
    stats.loss /= static_cast<double>(count);
    stats.contrastive /= static_cast<double>(count);
    stats.reconstructive /= static_cast<double>(count);
    return stats;
}

} // namespace

PretrainSetup pretrain_setup_from_string(const std::string& name) {
    if (name == "contrastive") return PretrainSetup::contrastive;
    if (name == "reconstructive") return PretrainSetup::reconstructive;
    if (name == "combo") return PretrainSetup::combo;
    throw Error("pretrain_setup_from_string: unknown setup " + name);
}

std::string to_string(PretrainSetup setup) {
    switch (setup) {
        case PretrainSetup::contrastive: return "contrastive";
        case PretrainSetup::reconstructive: return "reconstructive";
        case PretrainSetup::combo: return "combo";
    }
    return "unknown";
}

TrainResult pretrain_model(nn::PretrainModel& model, PretrainSetup setup,
                           const UnlabeledView& train, const UnlabeledView& val,
                           const TrainingConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (train.size() == 0) throw Error("pretrain: empty training set");

    nn::AdamOptimizer opt(model.store(), nn::AdamConfig{cfg.lr});
    rng::Generator train_gen(rng::derive_seed(seed, 0x7e11));
    IndexStream stream(train.size(), train_gen);

    TrainResult result;
    ValStats best = validate_pretrain(model, setup, val, cfg, seed);
    result.initial_val_loss = best.loss;
    result.best_val_loss = best.loss;
    result.best_step = 0;
    result.curve.push_back({0, 0.0, best.loss, best.contrastive, best.reconstructive});
    StoreSnapshot best_snapshot = take_snapshot(model.store());

    for (int step = 1; step <= cfg.steps; ++step) {
        model.store().zero_grad();
        double batch_loss = 0.0;
        for (int b = 0; b < cfg.batch_scenarios; ++b) {
            const UnlabeledScenario scenario = train.get(stream.next());
            nn::Graph g(/*training=*/true);
            const PretrainLossParts parts =
                pretrain_loss(g, model, setup, scenario, cfg, train_gen);
            const double value = parts.total.scalar();
            if (!std::isfinite(value)) {
                throw TrainingError("pretrain diverged at step " + std::to_string(step) +
                                    ": loss=" + std::to_string(value));
            }
            batch_loss += value;
            nn::backward(parts.total);
        }
        batch_loss /= static_cast<double>(cfg.batch_scenarios);
        opt.step(cosine_lr(cfg, step), 1.0 / static_cast<double>(cfg.batch_scenarios));

        if (step % cfg.checkpoint_interval == 0 || step == cfg.steps) {
            const ValStats stats = validate_pretrain(model, setup, val, cfg, seed);
            result.curve.push_back({step, batch_loss, stats.loss, stats.contrastive,
                                    stats.reconstructive});
            if (stats.loss < result.best_val_loss) {
                result.best_val_loss = stats.loss;
                result.best_step = step;
                best_snapshot = take_snapshot(model.store());
            }
        }
    }

    restore_snapshot(model.store(), best_snapshot);
    return result;
}

namespace {

double validate_finetune(const nn::ClassifierModel& model, const ScenarioDataset& dataset,
                         const std::vector<std::size_t>& val_indices, int max_val) {
    nn::NoGradGuard no_grad;
    nn::Graph g(/*training=*/false);
    const std::size_t count = std::min<std::size_t>(val_indices.size(), static_cast<std::size_t>(max_val));
    if (count == 0) throw Error("finetune: empty validation set");
    double total = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t idx = val_indices[i];
        const auto feats = dataset.features(idx);
        const nn::Variable probs = model.probabilities(g, feats);
        total += objectives::cross_entropy(probs, dataset.record(idx).label).scalar();
    }
    return total / static_cast<double>(count);
}

} // namespace

TrainResult finetune_model(nn::ClassifierModel& model, const ScenarioDataset& dataset,
                           const std::vector<std::size_t>& train_indices,
                           const std::vector<std::size_t>& val_indices,
                           const TrainingConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (train_indices.empty()) throw Error("finetune: empty training subset");

    nn::AdamOptimizer opt(model.store(), nn::AdamConfig{cfg.lr});
    rng::Generator train_gen(rng::derive_seed(seed, 0xf17e));
    IndexStream stream(train_indices.size(), train_gen);

    TrainResult result;
    result.initial_val_loss = validate_finetune(model, dataset, val_indices, cfg.max_val_scenarios);
    result.best_val_loss = result.initial_val_loss;
    result.best_step = 0;
    result.curve.push_back({0, 0.0, result.initial_val_loss, 0.0, 0.0});
    StoreSnapshot best_snapshot = take_snapshot(model.store());

    for (int step = 1; step <= cfg.steps; ++step) {
        model.store().zero_grad();
        double batch_loss = 0.0;
        for (int b = 0; b < cfg.batch_scenarios; ++b) {
            const std::size_t idx = train_indices[stream.next()];
            const auto feats = dataset.features(idx);
            nn::Graph g(/*training=*/true);
            const nn::Variable probs = model.probabilities(g, feats);
            const nn::Variable loss = objectives::cross_entropy(probs, dataset.record(idx).label);
            const double value = loss.scalar();
            if (!std::isfinite(value)) {
                throw TrainingError("finetune diverged at step " + std::to_string(step) +
                                    ": loss=" + std::to_string(value));
            }
            batch_loss += value;
            nn::backward(loss);
        }
        batch_loss /= static_cast<double>(cfg.batch_scenarios);
        opt.step(cosine_lr(cfg, step), 1.0 / static_cast<double>(cfg.batch_scenarios));

        if (step % cfg.checkpoint_interval == 0 || step == cfg.steps) {
            const double val_loss =
                validate_finetune(model, dataset, val_indices, cfg.max_val_scenarios);
            result.curve.push_back({step, batch_loss, val_loss, 0.0, 0.0});
            if (val_loss < result.best_val_loss) {
                result.best_val_loss = val_loss;
                result.best_step = step;
                best_snapshot = take_snapshot(model.store());
            }
        }
    }

    restore_snapshot(model.store(), best_snapshot);
    return result;
}

double evaluate_accuracy(const nn::ClassifierModel& model, const ScenarioDataset& dataset,
                         const std::vector<std::size_t>& indices) {
    if (indices.empty()) throw Error("evaluate: empty test set");
    nn::NoGradGuard no_grad;
    nn::Graph g(/*training=*/false);
    std::size_t correct = 0;
    for (const std::size_t idx : indices) {
        const auto feats = dataset.features(idx);
        const nn::Variable probs = model.probabilities(g, feats);
        int best = 0;
        for (long c = 1; c < probs.cols(); ++c) {
            if (probs.value().at(0, c) > probs.value().at(0, best)) best = static_cast<int>(c);
        }
        if (best == dataset.record(idx).label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(indices.size());
}

double evaluate_with(const std::function<int(const EvalItem&, std::size_t)>& predictor,
                     const std::vector<EvalItem>& items) {
    if (items.empty()) throw Error("evaluate: empty test set");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (predictor(items[i], i) == items[i].label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(items.size());
}

} // namespace arbiter::harness
