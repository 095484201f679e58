#include <benchmark/benchmark.h>

#include "arbiter/audio_synth.hpp"
#include "arbiter/feature_pipeline.hpp"
#include "arbiter/neural_core.hpp"
#include "arbiter/objectives.hpp"

using namespace arbiter;

namespace {

std::vector<feat::FeatureMatrix> make_features(int n_devices, double seconds) {
    std::vector<feat::FeatureMatrix> feats;
    for (int d = 0; d < n_devices; ++d) {
        rng::Generator gen(100 + static_cast<std::uint64_t>(d));
        const audio::Waveform w =
            audio::generate_source_audio(audio::SourceKind::synthetic_speech, seconds, gen);
        feats.push_back(feat::normalize(feat::lfbe(w)));
    }
    return feats;
}

} // namespace

static void BM_ClassifierForward(benchmark::State& state) {
    const auto feats = make_features(static_cast<int>(state.range(0)), 2.0);
    nn::ClassifierModel model(nn::ModelConfig::small_preset(), 1);
    nn::NoGradGuard no_grad;
    for (auto _ : state) {
        nn::Graph g(false);
        auto probs = model.probabilities(g, feats);
        benchmark::DoNotOptimize(probs.value().v.data());
    }
}
BENCHMARK(BM_ClassifierForward)->Arg(2)->Arg(4)->Arg(8);

static void BM_ClassifierTrainStep(benchmark::State& state) {
    const auto feats = make_features(3, 2.0);
    nn::ClassifierModel model(nn::ModelConfig::small_preset(), 1);
    for (auto _ : state) {
        model.store().zero_grad();
        nn::Graph g(true);
        auto probs = model.probabilities(g, feats);
        auto loss = objectives::cross_entropy(probs, 0);
        nn::backward(loss);
        benchmark::DoNotOptimize(loss.scalar());
    }
}
BENCHMARK(BM_ClassifierTrainStep);
