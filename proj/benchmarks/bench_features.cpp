#include <benchmark/benchmark.h>

#include "arbiter/audio_synth.hpp"
#include "arbiter/feature_pipeline.hpp"
#include "arbiter/rng.hpp"

using namespace arbiter;

static void BM_Lfbe(benchmark::State& state) {
    rng::Generator gen(7);
    const audio::Waveform w =
        audio::generate_source_audio(audio::SourceKind::synthetic_speech,
                                     static_cast<double>(state.range(0)), gen);
    for (auto _ : state) {
        auto f = feat::lfbe(w);
        benchmark::DoNotOptimize(f.values.data());
    }
}
BENCHMARK(BM_Lfbe)->Arg(1)->Arg(2)->Arg(4);

static void BM_LfbeNormalize(benchmark::State& state) {
    rng::Generator gen(7);
    const audio::Waveform w =
        audio::generate_source_audio(audio::SourceKind::synthetic_speech, 2.0, gen);
    const feat::FeatureMatrix f = feat::lfbe(w);
    for (auto _ : state) {
        auto n = feat::normalize(f);
        benchmark::DoNotOptimize(n.values.data());
    }
}
BENCHMARK(BM_LfbeNormalize);
