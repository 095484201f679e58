#include "arbiter/objectives.hpp"

#include <cmath>

#include "arbiter/errors.hpp"

namespace arbiter::objectives {

using nn::Variable;

void ObjectiveWeights::validate() const {
    if (lambda < 0.0 || lambda > 1.0) throw Error("ObjectiveWeights: lambda must be in [0, 1]");
}

namespace {

void check_unit(const Variable& z, const char* what) {
    double acc = 0.0;
    for (double v : z.value().v) acc += v * v;
    if (std::abs(std::sqrt(acc) - 1.0) > 1e-3) {
        throw Error(std::string("contrastive_loss: ") + what + " is not unit-norm");
    }
}

Variable dot(const Variable& a, const Variable& b) { return nn::sum_all(nn::mul(a, b)); }

Variable accumulate_term(Variable total, Variable term) {
    return total.defined() ? nn::add(total, term) : term;
}

} // namespace

Variable contrastive_loss(const std::vector<Variable>& first_half_embeddings,
                          const std::vector<Variable>& second_half_embeddings) {
    const std::size_t n = first_half_embeddings.size();
    if (n == 0 || second_half_embeddings.size() != n) {
        throw Error("contrastive_loss: need equal nonempty embedding lists");
    }
    for (const auto& z : first_half_embeddings) check_unit(z, "first-half embedding");
    for (const auto& z : second_half_embeddings) check_unit(z, "second-half embedding");

    Variable loss;
    // L1: cross-half inner products against the Kronecker delta.
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double delta = i == j ? 1.0 : 0.0;
            Variable term = nn::abs_val(nn::add_scalar(
                dot(first_half_embeddings[i], second_half_embeddings[j]), -delta));
            loss = accumulate_term(loss, std::move(term));
        }
    }
    // L2: same-half off-diagonal inner products toward zero.
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            loss = accumulate_term(
                loss, nn::abs_val(dot(first_half_embeddings[i], first_half_embeddings[j])));
            loss = accumulate_term(
                loss, nn::abs_val(dot(second_half_embeddings[i], second_half_embeddings[j])));
        }
    }
    return loss;
}

double contrastive_loss_value(const std::vector<std::vector<double>>& first_half,
                              const std::vector<std::vector<double>>& second_half) {
    std::vector<Variable> za, zb;
    za.reserve(first_half.size());
    zb.reserve(second_half.size());
    auto to_var = [](const std::vector<double>& v) {
        nn::TensorData t(1, static_cast<long>(v.size()));
        t.v = v;
        return nn::constant(std::move(t));
    };
    for (const auto& v : first_half) za.push_back(to_var(v));
    for (const auto& v : second_half) zb.push_back(to_var(v));
    return contrastive_loss(za, zb).scalar();
}

SplitSpec make_split(long total_samples, double epsilon, rng::Generator& gen, int frame_size) {
    if (total_samples < 2L * frame_size) {
        throw Error("make_split: input shorter than two feature frames");
    }
    if (epsilon < 0.0 || epsilon >= 0.5) throw Error("make_split: epsilon must be in [0, 0.5)");

    SplitSpec spec;
    spec.total = total_samples;
    spec.epsilon = epsilon;
    const double center = static_cast<double>(total_samples) / 2.0;
    if (epsilon == 0.0) {
        spec.t_split = total_samples / 2;
        return spec;
    }
    const double band = epsilon * static_cast<double>(total_samples);
    const double jitter = (2.0 * gen.uniform() - 1.0) * band;
    long t = std::llround(center + jitter);
    // Keep the draw strictly inside the jitter band and the waveform.
    const auto lo = static_cast<long>(std::floor(center - band)) + 1;
    const auto hi = static_cast<long>(std::ceil(center + band)) - 1;
    t = std::clamp(t, lo, hi);
    t = std::clamp(t, 1L, total_samples - 1);
    spec.t_split = t;
    return spec;
}

std::pair<audio::Waveform, audio::Waveform> split_waveform(const audio::Waveform& x,
                                                           const SplitSpec& split) {
    if (split.total != static_cast<long>(x.samples.size())) {
        throw Error("split_waveform: split does not match waveform length");
    }
    audio::Waveform first{{x.samples.begin(), x.samples.begin() + split.t_split}, x.sample_rate};
    audio::Waveform second{{x.samples.begin() + split.t_split, x.samples.end()}, x.sample_rate};
    return {std::move(first), std::move(second)};
}

std::vector<int> draw_reconstruction_partners(int n_devices, rng::Generator& gen) {
    if (n_devices < 2) throw Error("draw_reconstruction_partners: need at least two devices");
    std::vector<int> partners(static_cast<std::size_t>(n_devices));
    for (int i = 0; i < n_devices; ++i) {
        const int r = static_cast<int>(gen.uniform_int(0, n_devices - 2));
        partners[static_cast<std::size_t>(i)] = r + (r >= i ? 1 : 0);
    }
    return partners;
}

Variable reconstructive_loss(nn::Graph& g, const std::vector<feat::FeatureMatrix>& device_features,
                             const nn::PretrainModel& model, rng::Generator& gen) {
    const auto partners = draw_reconstruction_partners(static_cast<int>(device_features.size()), gen);
    return reconstructive_loss_with_partners(g, device_features, partners, model);
}

Variable reconstructive_loss_with_partners(nn::Graph& g,
                                           const std::vector<feat::FeatureMatrix>& device_features,
                                           const std::vector<int>& partners,
                                           const nn::PretrainModel& model) {
    const DecoderFn production = [&model](nn::Graph& graph, int, const Variable& speech,
                                          const Variable& z, const feat::Envelope& env) {
        return model.decoder().forward(graph, speech, z, env);
    };
    return reconstructive_loss_with_partners(g, device_features, partners, model, production);
}

Variable reconstructive_loss_with_partners(nn::Graph& g,
                                           const std::vector<feat::FeatureMatrix>& device_features,
                                           const std::vector<int>& partners,
                                           const nn::PretrainModel& model,
                                           const DecoderFn& decoder) {
    const std::size_t n = device_features.size();
    if (n < 2) throw Error("reconstructive_loss: need at least two devices");
    if (partners.size() != n) throw Error("reconstructive_loss: partner list size mismatch");
    if (!model.has_reconstruction()) {
        throw Error("reconstructive_loss: model built without reconstruction heads");
    }

    Variable total;
    for (std::size_t i = 0; i < n; ++i) {
        const int j = partners[i];
        if (j < 0 || j >= static_cast<int>(n) || j == static_cast<int>(i)) {
            throw Error("reconstructive_loss: invalid partner index");
        }
        const Variable speech_seq =
            model.speech_encoder().forward(g, device_features[static_cast<std::size_t>(j)]);
        const Variable z = model.embed(g, device_features[i]);
        const feat::Envelope env = feat::envelope(device_features[i]);
        const Variable predicted = decoder(g, static_cast<int>(i), speech_seq, z, env);

        nn::TensorData target(device_features[i].frames, device_features[i].bins);
        target.v = device_features[i].values;
        const Variable diff = nn::sub(predicted, nn::constant(std::move(target)));
        total = accumulate_term(total, nn::mean_all(nn::mul(diff, diff)));
    }
    return nn::scale(total, 1.0 / static_cast<double>(n));
}

double combo_loss(double reconstructive, double contrastive, const ObjectiveWeights& w) {
    w.validate();
    return w.lambda * reconstructive + (1.0 - w.lambda) * contrastive;
}

Variable combo_loss(const Variable& reconstructive, const Variable& contrastive,
                    const ObjectiveWeights& w) {
    w.validate();
    return nn::add(nn::scale(reconstructive, w.lambda), nn::scale(contrastive, 1.0 - w.lambda));
}

double cross_entropy(const std::vector<double>& probs, int label) {
    if (label < 0 || label >= static_cast<int>(probs.size())) {
        throw Error("cross_entropy: label out of range");
    }
    return -std::log(std::max(probs[static_cast<std::size_t>(label)], 1e-12));
}

Variable cross_entropy(const Variable& probs_row, int label) {
    if (probs_row.rows() != 1) throw Error("cross_entropy: expected a probability row vector");
    if (label < 0 || label >= probs_row.cols()) throw Error("cross_entropy: label out of range");
    return nn::scale(nn::log_clamped(nn::pick(probs_row, 0, label), 1e-12), -1.0);
}

double relative_error_rate(double acc_m, double acc_base) {
    if (acc_m < 0.0 || acc_m > 1.0 || acc_base < 0.0 || acc_base > 1.0) {
        throw Error("relative_error_rate: accuracies must be in [0, 1]");
    }
    if (acc_base == 1.0) {
        throw Error("relative_error_rate: baseline accuracy of 1 (division by zero)");
    }
    return (1.0 - acc_m) / (1.0 - acc_base);
}

} // namespace arbiter::objectives
