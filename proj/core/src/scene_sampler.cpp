#include "arbiter/scene_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "arbiter/errors.hpp"

namespace arbiter::scene {

namespace {
constexpr int kMaxRejectionDraws = 10000;
} // namespace

void ShiftedPoissonParams::validate() const {
    if (low > high) throw Error("ShiftedPoissonParams: low > high");
    if (mean < static_cast<double>(low)) throw Error("ShiftedPoissonParams: mean < low");
}

void Range::validate(const char* what) const {
    if (!(low <= high)) throw Error(std::string("Range ") + what + ": low > high");
}

void SamplingConfig::validate() const {
    room_length_range.validate("room_length");
    room_width_range.validate("room_width");
    room_height_range.validate("room_height");
    speech_level_range.validate("speech_level");
    noise_level_range.validate("noise_level");
    device_height_range.validate("device_height");
    speaker_height_range.validate("speaker_height");
    if (rt60_beta_alpha <= 0.0 || rt60_beta_beta <= 0.0) {
        throw Error("SamplingConfig: rt60 beta parameters must be positive");
    }
    device_count.validate();
    noise_count.validate();
    if (wall_margin < 0.0) throw Error("SamplingConfig: wall_margin must be >= 0");
    if (min_separation < 0.0) throw Error("SamplingConfig: min_separation must be >= 0");
}

int shifted_poisson_sample(const ShiftedPoissonParams& params, rng::Generator& gen) {
    params.validate();
    if (params.low == params.high) return params.low;
    const double lambda = params.mean - static_cast<double>(params.low);
    for (int attempt = 0; attempt < kMaxRejectionDraws; ++attempt) {
        const int k = params.low + gen.poisson(lambda);
        if (k <= params.high) return k;
    }
    throw SamplingError("shifted_poisson_sample: rejection cap exceeded");
}

int assign_label(std::span<const Vec3> device_positions, const Vec3& speaker_position) {
    if (device_positions.empty()) throw Error("assign_label: empty device list");
    int best = 0;
    double best_dist = distance(device_positions[0], speaker_position);
    for (int i = 1; i < static_cast<int>(device_positions.size()); ++i) {
        const double d = distance(device_positions[static_cast<std::size_t>(i)], speaker_position);
        if (d < best_dist) {
            best = i;
            best_dist = d;
        }
    }
    return best;
}

namespace {

// Uniform position in the margin-shrunk room with a clamped height band.
// Redrawn until strictly inside and min_separation away from placed entities.
Vec3 place_entity(const SamplingConfig& cfg, const RoomDims& room,
                  const Range& height_range, std::span<const Vec3> placed,
                  rng::Generator& gen, const char* what) {
    const double m = cfg.wall_margin;
    const double zlo = std::max(m, height_range.low);
    const double zhi = std::min(room[2] - m, height_range.high);
    if (!(zlo < zhi)) {
        throw PlacementError(std::string("sample_scene: empty height band for ") + what);
    }
    for (int attempt = 0; attempt < kMaxRejectionDraws; ++attempt) {
        const Vec3 p{gen.uniform(m, room[0] - m),
                     gen.uniform(m, room[1] - m),
                     gen.uniform(zlo, zhi)};
        if (!inside_room(room, p, m)) continue;
        bool ok = true;
        for (const Vec3& q : placed) {
            if (distance(p, q) < cfg.min_separation) {
                ok = false;
                break;
            }
        }
        if (ok) return p;
    }
    throw PlacementError(std::string("sample_scene: cannot place ") + what +
                         " with min_separation " + std::to_string(cfg.min_separation));
}

} // namespace

SceneSpec sample_scene(const SamplingConfig& config, std::uint64_t seed) {
    config.validate();
    rng::Generator gen(rng::derive_seed(seed, 0x5ce9e));

    SceneSpec spec;
    spec.seed = seed;
    spec.room_dims = {
        gen.uniform(config.room_length_range.low, config.room_length_range.high),
        gen.uniform(config.room_width_range.low, config.room_width_range.high),
        gen.uniform(config.room_height_range.low, config.room_height_range.high)};
    spec.rt60 = gen.beta(config.rt60_beta_alpha, config.rt60_beta_beta);
    const int n_devices = shifted_poisson_sample(config.device_count, gen);
    const int n_noises = shifted_poisson_sample(config.noise_count, gen);
    spec.speech_level_db = gen.uniform(config.speech_level_range.low, config.speech_level_range.high);
    spec.noise_level_db = gen.uniform(config.noise_level_range.low, config.noise_level_range.high);

    std::vector<Vec3> placed;
    placed.reserve(static_cast<std::size_t>(n_devices + n_noises) + 1);

    spec.speaker_position = place_entity(config, spec.room_dims, config.speaker_height_range,
                                         placed, gen, "speaker");
    placed.push_back(spec.speaker_position);

    spec.device_positions.reserve(static_cast<std::size_t>(n_devices));
    for (int i = 0; i < n_devices; ++i) {
        const Vec3 p = place_entity(config, spec.room_dims, config.device_height_range,
                                    placed, gen, "device");
        spec.device_positions.push_back(p);
        placed.push_back(p);
    }

    const Range full_height{0.0, spec.room_dims[2]};
    spec.noise_positions.reserve(static_cast<std::size_t>(n_noises));
    for (int i = 0; i < n_noises; ++i) {
        const Vec3 p = place_entity(config, spec.room_dims, full_height, placed, gen, "noise");
        spec.noise_positions.push_back(p);
        placed.push_back(p);
    }

    spec.label = assign_label(spec.device_positions, spec.speaker_position);
    return spec;
}

} // namespace arbiter::scene
