#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "arbiter/geometry.hpp"
#include "arbiter/rng.hpp"

namespace arbiter::scene {

/// Integer count distribution: low + Poisson(mean - low), redrawn while the
/// result exceeds high.
struct ShiftedPoissonParams {
    double mean = 0.0;
    int low = 0;
    int high = 0;

    void validate() const;
};

struct Range {
    double low = 0.0;
    double high = 0.0;

    void validate(const char* what) const;
};

/// Scene sampling hyperparameters. Defaults are the production sampling
/// distributions this toolkit ships with.
struct SamplingConfig {
    Range room_length_range{3.0, 10.0};
    Range room_width_range{3.0, 10.0};
    Range room_height_range{2.5, 6.0};
    double rt60_beta_alpha = 1.1;
    double rt60_beta_beta = 3.0;
    ShiftedPoissonParams device_count{3.0, 2, 15};
    ShiftedPoissonParams noise_count{2.0, 1, 5};
    Range speech_level_range{55.0, 70.0}; // dB SPL
    Range noise_level_range{50.0, 70.0};  // dB SPL
    double wall_margin = 0.5;     // meters
    double min_separation = 0.3;  // meters
    // Height conventions: devices sit on furniture, speakers stand.
    Range device_height_range{0.5, 1.5};
    Range speaker_height_range{1.0, 2.0};

    void validate() const;
};

/// One sampled arbitration scene. A pure function of (config, seed).
struct SceneSpec {
    RoomDims room_dims{0.0, 0.0, 0.0}; // length, width, height (m)
    double rt60 = 0.0;                 // seconds
    std::vector<Vec3> device_positions;
    Vec3 speaker_position;
    std::vector<Vec3> noise_positions;
    double speech_level_db = 0.0; // dB SPL
    double noise_level_db = 0.0;  // dB SPL
    int label = -1;               // index of the closest device
    std::uint64_t seed = 0;

    bool operator==(const SceneSpec&) const = default;
};

/// Draws from low + Poisson(mean - low), rejecting draws above high.
/// Throws SamplingError if rejection does not terminate within 10^4 draws.
int shifted_poisson_sample(const ShiftedPoissonParams& params, rng::Generator& gen);

/// Index of the device closest to the speaker; exact ties go to the lowest
/// index. Throws on an empty device list.
int assign_label(std::span<const Vec3> device_positions, const Vec3& speaker_position);

/// Samples a full scene. Deterministic in (config, seed). Throws
/// PlacementError when min_separation cannot be satisfied in 10^4 attempts.
SceneSpec sample_scene(const SamplingConfig& config, std::uint64_t seed);

} // namespace arbiter::scene
