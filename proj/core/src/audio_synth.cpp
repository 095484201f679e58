#include "arbiter/audio_synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "arbiter/dsp.hpp"
#include "arbiter/errors.hpp"
#include "arbiter/wav.hpp"

namespace arbiter::audio {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kReferenceSpl = 94.0; // dB SPL mapped to RMS 1.0

// Two-pole resonator, retunable per sample for formant sweeps.
class Resonator {
public:
    Resonator(double freq, double bandwidth, double fs) { tune(freq, bandwidth, fs); }

    void tune(double freq, double bandwidth, double fs) {
        const double r = std::exp(-kPi * bandwidth / fs);
        b1_ = 2.0 * r * std::cos(2.0 * kPi * freq / fs);
        b2_ = -r * r;
        gain_ = 1.0 - r;
    }

    double step(double x) {
        const double y = b1_ * y1_ + b2_ * y2_ + gain_ * x;
        y2_ = y1_;
        y1_ = y;
        return y;
    }

private:
    double b1_ = 0.0, b2_ = 0.0, gain_ = 1.0;
    double y1_ = 0.0, y2_ = 0.0;
};

Waveform normalize_rms(Waveform w, double target) {
    const double r = rms(w);
    if (r > 0.0) {
        const double s = target / r;
        for (double& v : w.samples) v *= s;
    }
    return w;
}

Waveform synthetic_speech(double duration_s, rng::Generator& gen) {
    const double fs = 16000.0;
    const auto n = static_cast<std::size_t>(std::llround(duration_s * fs));
    Waveform w;
    w.sample_rate = fs;
    w.samples.resize(n, 0.0);

    const double f0_base = gen.uniform(100.0, 160.0);
    const double glide_rate = gen.uniform(0.3, 0.8);
    const double glide_phase = gen.uniform(0.0, 2.0 * kPi);
    const double vib_phase = gen.uniform(0.0, 2.0 * kPi);
    const double syll_rate = gen.uniform(2.5, 4.5);
    const double syll_phase = gen.uniform(0.0, kPi);
    const double f1_lo = gen.uniform(300.0, 450.0), f1_hi = gen.uniform(650.0, 950.0);
    const double f2_lo = gen.uniform(900.0, 1200.0), f2_hi = gen.uniform(1800.0, 2500.0);
    const double sweep_rate = gen.uniform(0.4, 1.2);
    const double sweep_phase = gen.uniform(0.0, 2.0 * kPi);

    Resonator formant1(f1_lo, 90.0, fs);
    Resonator formant2(f2_lo, 140.0, fs);
    Resonator burst_band(2500.0, 1800.0, fs);

    double phase = gen.uniform(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / fs;
        const double f0 = f0_base *
            std::exp2(0.25 * std::sin(2.0 * kPi * glide_rate * t + glide_phase) +
                      0.03 * std::sin(2.0 * kPi * 5.5 * t + vib_phase));
        phase += f0 / fs;
        double pulse = 0.0;
        if (phase >= 1.0) {
            phase -= 1.0;
            pulse = 1.0;
        }

        const double sweep = 0.5 * (1.0 + std::sin(2.0 * kPi * sweep_rate * t + sweep_phase));
        formant1.tune(f1_lo + (f1_hi - f1_lo) * sweep, 90.0, fs);
        formant2.tune(f2_hi + (f2_lo - f2_hi) * sweep, 140.0, fs);
        const double voiced = formant1.step(pulse) + 0.7 * formant2.step(pulse);

        const double syll = std::sin(kPi * syll_rate * t + syll_phase);
        const double voicing_env = std::pow(std::abs(syll), 0.7);
        // Soft noise bursts fill the gaps between "syllables".
        const double burst_env = (1.0 - voicing_env) * (1.0 - voicing_env);
        const double burst = burst_band.step(gen.normal()) * burst_env * 0.05;

        const double edge = std::min({1.0, t / 0.05, (duration_s - t) / 0.05});
        w.samples[i] = (voiced * voicing_env + burst) * std::max(edge, 0.0);
    }
    return normalize_rms(std::move(w), 0.1);
}

Waveform load_file_source(const std::string& path);

} // namespace

double rms(const Waveform& x) {
    if (x.samples.empty()) return 0.0;
    double acc = 0.0;
    for (double v : x.samples) acc += v * v;
    return std::sqrt(acc / static_cast<double>(x.samples.size()));
}

Waveform convolve(const Waveform& x, const rir::RoomImpulseResponse& rir) {
    if (x.sample_rate != rir.sample_rate) {
        throw AudioError("convolve: waveform and RIR sample rates differ");
    }
    if (x.samples.empty() || rir.taps.empty()) throw AudioError("convolve: empty input");
    std::vector<double> full = dsp::convolve_fft(x.samples, rir.taps);
    const std::size_t keep = x.samples.size() +
        static_cast<std::size_t>(std::ceil(rir.rt60_target * rir.sample_rate));
    full.resize(std::min(full.size(), keep));
    return {std::move(full), x.sample_rate};
}

Waveform set_level(const Waveform& x, double level_spl) {
    const double r = rms(x);
    if (r <= 0.0) throw AudioError("set_level: silent input");
    const double target = std::pow(10.0, (level_spl - kReferenceSpl) / 20.0);
    Waveform out = x;
    const double s = target / r;
    for (double& v : out.samples) v *= s;
    return out;
}

namespace {

Waveform load_file_source(const std::string& path) {
    const wav::WavData data = [&] {
        try {
            return wav::read(path);
        } catch (const AudioError& e) {
            throw AudioError(std::string("generate_source_audio: ") + e.what());
        }
    }();
    if (data.channels != 1) {
        throw AudioError("generate_source_audio: expected mono file, got " +
                         std::to_string(data.channels) + " channels");
    }
    Waveform w{data.samples, data.sample_rate};
    if (data.sample_rate != 16000.0) {
        w.samples = dsp::resample_sinc(w.samples, data.sample_rate, 16000.0);
        w.sample_rate = 16000.0;
    }
    return w;
}

} // namespace

Waveform generate_source_audio(SourceKind kind, double duration_s, rng::Generator& gen,
                               const std::string& path) {
    if (duration_s <= 0.0) throw AudioError("generate_source_audio: duration must be positive");
    switch (kind) {
        case SourceKind::synthetic_speech:
            return synthetic_speech(duration_s, gen);
        case SourceKind::file:
            return load_file_source(path);
    }
    throw AudioError("generate_source_audio: unknown source kind");
}

Waveform generate_noise(NoiseKind kind, double duration_s, rng::Generator& gen) {
    const double fs = 16000.0;
    const auto n = static_cast<std::size_t>(std::llround(duration_s * fs));
    Waveform w;
    w.sample_rate = fs;
    w.samples.resize(n);

    switch (kind) {
        case NoiseKind::white: {
            for (auto& v : w.samples) v = gen.normal();
            break;
        }
        case NoiseKind::pink: {
            // Paul Kellet's 1/f filter.
            double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
            for (auto& v : w.samples) {
                const double white = gen.normal();
                b0 = 0.99886 * b0 + white * 0.0555179;
                b1 = 0.99332 * b1 + white * 0.0750759;
                b2 = 0.96900 * b2 + white * 0.1538520;
                b3 = 0.86650 * b3 + white * 0.3104856;
                b4 = 0.55000 * b4 + white * 0.5329522;
                b5 = -0.7616 * b5 - white * 0.0168980;
                v = b0 + b1 + b2 + b3 + b4 + b5 + b6 + white * 0.5362;
                b6 = white * 0.115926;
            }
            break;
        }
        case NoiseKind::speech_shaped: {
            Resonator low(500.0, 350.0, fs);
            Resonator mid(1400.0, 800.0, fs);
            for (auto& v : w.samples) {
                const double white = gen.normal();
                v = low.step(white) + 0.4 * mid.step(white) + 0.05 * white;
            }
            break;
        }
    }
    return normalize_rms(std::move(w), 0.1);
}

NoiseKind pick_noise_kind(rng::Generator& gen) {
    switch (gen.uniform_int(0, 2)) {
        case 0: return NoiseKind::white;
        case 1: return NoiseKind::pink;
        default: return NoiseKind::speech_shaped;
    }
}

std::vector<Waveform> render_sources(const scene::SceneSpec& scene,
                                     const std::vector<std::pair<Vec3, Waveform>>& sources,
                                     const RirProvider& rir_provider) {
    const std::size_t n_devices = scene.device_positions.size();
    std::vector<Waveform> out(n_devices);
    std::size_t common_len = 0;
    for (std::size_t d = 0; d < n_devices; ++d) {
        Waveform mix;
        for (const auto& [pos, wave] : sources) {
            const rir::RoomImpulseResponse rir = rir_provider(pos, scene.device_positions[d]);
            Waveform contrib = convolve(wave, rir);
            if (mix.samples.empty()) {
                mix = std::move(contrib);
            } else {
                if (contrib.samples.size() > mix.samples.size()) {
                    mix.samples.resize(contrib.samples.size(), 0.0);
                }
                for (std::size_t i = 0; i < contrib.samples.size(); ++i) {
                    mix.samples[i] += contrib.samples[i];
                }
            }
        }
        common_len = std::max(common_len, mix.samples.size());
        out[d] = std::move(mix);
    }
    for (auto& w : out) {
        w.sample_rate = sources.empty() ? 16000.0 : sources.front().second.sample_rate;
        w.samples.resize(common_len, 0.0);
    }
    return out;
}

ArbitrationScenario render_scenario(const scene::SceneSpec& scene, const Waveform& speech,
                                    const std::vector<Waveform>& noises,
                                    const RirProvider& rir_provider) {
    if (noises.size() != scene.noise_positions.size()) {
        throw AudioError("render_scenario: noise count does not match scene noise positions");
    }
    std::vector<std::pair<Vec3, Waveform>> sources;
    sources.reserve(noises.size() + 1);
    sources.emplace_back(scene.speaker_position, set_level(speech, scene.speech_level_db));
    for (std::size_t k = 0; k < noises.size(); ++k) {
        sources.emplace_back(scene.noise_positions[k], set_level(noises[k], scene.noise_level_db));
    }

    ArbitrationScenario scenario;
    scenario.scene = scene;
    scenario.device_waveforms = render_sources(scene, sources, rir_provider);
    scenario.label = scene.label;
    scenario.duration_s = speech.duration_s();
    return scenario;
}

ArbitrationScenario render_scenario_from_seed(const scene::SceneSpec& scene,
                                              double duration_s,
                                              const rir::RirParams& rir_params) {
    rng::Generator speech_gen(rng::derive_seed(scene.seed, 0xA0D10));
    const Waveform speech = generate_source_audio(SourceKind::synthetic_speech, duration_s, speech_gen);

    std::vector<Waveform> noises;
    noises.reserve(scene.noise_positions.size());
    for (std::size_t k = 0; k < scene.noise_positions.size(); ++k) {
        rng::Generator noise_gen(rng::derive_seed(scene.seed, 0xB0000 + k));
        noises.push_back(generate_noise(pick_noise_kind(noise_gen), duration_s, noise_gen));
    }

    // Resolve the absorption once per scene; every source/mic pair shares it.
    rir::RirParams scene_params = rir_params;
    if (!scene_params.force_alpha) {
        scene_params.force_alpha =
            rir::absorption_for_target(scene.room_dims, scene.rt60, rir_params);
    }
    const auto provider = [&](const Vec3& src, const Vec3& mic) {
        return rir::synthesize_rir(scene.room_dims, src, mic, scene.rt60, scene_params);
    };
    return render_scenario(scene, speech, noises, provider);
}

} // namespace arbiter::audio
