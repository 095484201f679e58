#pragma once

#include <cstdint>
#include <vector>

#include "arbiter/audio_synth.hpp"
#include "arbiter/feature_pipeline.hpp"
#include "arbiter/neural_core.hpp"
#include "arbiter/nn/tensor.hpp"
#include "arbiter/rng.hpp"

namespace arbiter::objectives {

/// Where a padded recording of length T is cut in two. t_split stays within
/// a jitter band of half-width epsilon * T around T/2; one split is shared
/// by all recordings of a scenario.
struct SplitSpec {
    long total = 0;
    long t_split = 0;
    double epsilon = 0.05;
};

struct ObjectiveWeights {
    double lambda = 0.5;

    void validate() const;
};

/// Contrastive loss over the half-slice embeddings of one scenario:
/// L1 pulls the two halves of each recording to the same unit vector,
/// L2 pushes same-half embeddings of different recordings to orthogonality.
/// Inputs must be unit vectors (1 x D); norm deviation > 1e-3 is an error.
nn::Variable contrastive_loss(const std::vector<nn::Variable>& first_half_embeddings,
                              const std::vector<nn::Variable>& second_half_embeddings);

/// Plain-data convenience wrapper.
double contrastive_loss_value(const std::vector<std::vector<double>>& first_half,
                              const std::vector<std::vector<double>>& second_half);

/// Draws the jittered split index. epsilon = 0 yields exactly T/2.
SplitSpec make_split(long total_samples, double epsilon, rng::Generator& gen,
                     int frame_size = 400);

/// The two waveform slices [0, t_split) and [t_split, T).
std::pair<audio::Waveform, audio::Waveform> split_waveform(const audio::Waveform& x,
                                                           const SplitSpec& split);

/// Uniform partner choice j != i for every i, consuming the generator in
/// device order.
std::vector<int> draw_reconstruction_partners(int n_devices, rng::Generator& gen);

/// Mean-per-element squared reconstruction error, averaged over devices,
/// with each device reconstructed from a random partner's speech sequence,
/// its own acoustic embedding, and its own envelope. Features must be
/// normalized LFBE; requires at least two devices.
nn::Variable reconstructive_loss(nn::Graph& g,
                                 const std::vector<feat::FeatureMatrix>& device_features,
                                 const nn::PretrainModel& model, rng::Generator& gen);

/// Same loss with the partner assignment fixed by the caller.
nn::Variable reconstructive_loss_with_partners(
    nn::Graph& g, const std::vector<feat::FeatureMatrix>& device_features,
    const std::vector<int>& partners, const nn::PretrainModel& model);

/// Decoder seam: (device index, partner speech sequence, acoustic embedding,
/// envelope) -> reconstructed features. Lets tests substitute oracle stubs.
using DecoderFn = std::function<nn::Variable(nn::Graph&, int, const nn::Variable&,
                                             const nn::Variable&, const feat::Envelope&)>;

nn::Variable reconstructive_loss_with_partners(
    nn::Graph& g, const std::vector<feat::FeatureMatrix>& device_features,
    const std::vector<int>& partners, const nn::PretrainModel& model, const DecoderFn& decoder);

/// lambda * L_R + (1 - lambda) * L_C.
double combo_loss(double reconstructive, double contrastive, const ObjectiveWeights& w);
nn::Variable combo_loss(const nn::Variable& reconstructive, const nn::Variable& contrastive,
                        const ObjectiveWeights& w);

/// -log(probs[label]) with a 1e-12 floor inside the log.
double cross_entropy(const std::vector<double>& probs, int label);
nn::Variable cross_entropy(const nn::Variable& probs_row, int label);

/// (1 - acc_m) / (1 - acc_base); errors out when acc_base == 1.
double relative_error_rate(double acc_m, double acc_base);

} // namespace arbiter::objectives
