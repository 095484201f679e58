#include <benchmark/benchmark.h>

#include "arbiter/rir_engine.hpp"

using namespace arbiter;

static void BM_SynthesizeRir(benchmark::State& state) {
    const RoomDims room{6.0, 5.0, 3.0};
    const Vec3 source{1.2, 2.1, 1.5};
    const Vec3 mic{4.3, 3.2, 1.1};
    const double rt60 = static_cast<double>(state.range(0)) / 1000.0;
    for (auto _ : state) {
        auto rir = rir::synthesize_rir(room, source, mic, rt60, 16000.0);
        benchmark::DoNotOptimize(rir.taps.data());
    }
}
BENCHMARK(BM_SynthesizeRir)->Arg(200)->Arg(400)->Arg(600);

static void BM_EnumerateImages(benchmark::State& state) {
    const RoomDims room{6.0, 5.0, 3.0};
    const Vec3 source{1.2, 2.1, 1.5};
    const int order = static_cast<int>(state.range(0));
    for (auto _ : state) {
        auto images = rir::enumerate_images(room, source, order);
        benchmark::DoNotOptimize(images.data());
    }
}
BENCHMARK(BM_EnumerateImages)->Arg(2)->Arg(6)->Arg(12);
