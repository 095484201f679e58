#pragma once

#include <functional>
#include <string>
#include <vector>

#include "arbiter/rir_engine.hpp"
#include "arbiter/rng.hpp"
#include "arbiter/scene_sampler.hpp"

namespace arbiter::audio {

struct Waveform {
    std::vector<double> samples;
    double sample_rate = 16000.0;

    double duration_s() const {
        return static_cast<double>(samples.size()) / sample_rate;
    }
};

/// One rendered training example: what every device in the scene recorded.
struct ArbitrationScenario {
    scene::SceneSpec scene;
    std::vector<Waveform> device_waveforms; // one per device, equal length
    int label = -1;                         // == scene.label
    double duration_s = 2.0;                // nominal source duration
};

/// Full linear convolution (transform-based), trimmed to
/// |x| + ceil(rt60_target * fs) samples. Throws on sample-rate mismatch.
Waveform convolve(const Waveform& x, const rir::RoomImpulseResponse& rir);

/// Scales the waveform so its RMS equals 10^((level_spl - 94) / 20); the
/// 94 dB SPL <-> RMS 1.0 convention anchors digital level to SPL. Applied to
/// source signals before propagation. Throws on silent input.
Waveform set_level(const Waveform& x, double level_spl);

double rms(const Waveform& x);

enum class SourceKind { synthetic_speech, file };

/// Source audio for a scenario. synthetic_speech builds a speech-like signal
/// (glottal pulse train through gliding formant resonators plus soft noise
/// bursts); file loads a mono WAV and resamples it to 16 kHz if needed.
Waveform generate_source_audio(SourceKind kind, double duration_s, rng::Generator& gen,
                               const std::string& path = {});

enum class NoiseKind { white, pink, speech_shaped };

Waveform generate_noise(NoiseKind kind, double duration_s, rng::Generator& gen);

/// Picks a noise kind from the generator (used per scene).
NoiseKind pick_noise_kind(rng::Generator& gen);

using RirProvider = std::function<rir::RoomImpulseResponse(const Vec3& source, const Vec3& mic)>;

/// Sums each pre-leveled (position, waveform) source into every device
/// channel through its RIR. Outputs are zero-padded to a common length.
std::vector<Waveform> render_sources(const scene::SceneSpec& scene,
                                     const std::vector<std::pair<Vec3, Waveform>>& sources,
                                     const RirProvider& rir_provider);

/// Renders the full scenario: leveled speech from the speaker position plus
/// every leveled noise source, mixed per device.
ArbitrationScenario render_scenario(const scene::SceneSpec& scene, const Waveform& speech,
                                    const std::vector<Waveform>& noises,
                                    const RirProvider& rir_provider);

/// Deterministic end-to-end rendering for one scene: generates the source
/// speech and noises from the scene seed and synthesizes RIRs on the fly.
ArbitrationScenario render_scenario_from_seed(const scene::SceneSpec& scene,
                                              double duration_s,
                                              const rir::RirParams& rir_params);

} // namespace arbiter::audio
