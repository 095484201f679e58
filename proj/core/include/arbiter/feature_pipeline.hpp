#pragma once

#include <cstddef>
#include <vector>

#include "arbiter/audio_synth.hpp"

namespace arbiter::feat {

struct LfbeConfig {
    int frame_size = 400; // 25 ms @ 16 kHz
    int hop = 160;        // 10 ms
    int fft_size = 512;
    int bins = 64;
    double fmin_hz = 0.0;
    double fmax_hz = 8000.0;
    double floor = 1e-10;
    double sample_rate = 16000.0;
};

/// frames x bins matrix of log-filterbank energies, row-major.
struct FeatureMatrix {
    int frames = 0;
    int bins = 64;
    std::vector<double> values; // frames * bins
    int frame_size = 400;
    int hop = 160;
    bool normalized = false;

    double& at(int frame, int bin) {
        return values[static_cast<std::size_t>(frame) * static_cast<std::size_t>(bins) +
                      static_cast<std::size_t>(bin)];
    }
    double at(int frame, int bin) const {
        return values[static_cast<std::size_t>(frame) * static_cast<std::size_t>(bins) +
                      static_cast<std::size_t>(bin)];
    }
};

/// Scalar-per-frame mean of the feature matrix.
struct Envelope {
    std::vector<double> values;
};

/// 1 + floor((num_samples - frame_size) / hop) for num_samples >= frame_size.
int frame_count(std::size_t num_samples, int frame_size = 400, int hop = 160);

/// Triangular mel filterbank over the power spectrum,
/// mel(f) = 2595 log10(1 + f / 700).
class MelFilterbank {
public:
    MelFilterbank(const LfbeConfig& config);

    static double hz_to_mel(double hz);
    static double mel_to_hz(double mel);

    const std::vector<double>& center_freqs_hz() const { return centers_hz_; }

    /// power has fft_size/2 + 1 entries; returns bins pooled energies.
    std::vector<double> apply(const std::vector<double>& power) const;

private:
    int bins_;
    int spectrum_size_;
    std::vector<double> weights_; // bins x spectrum, row-major
    std::vector<double> centers_hz_;
};

/// Hann-windowed power spectrogram pooled through the mel filterbank, then
/// natural log with the configured floor. Unnormalized.
FeatureMatrix lfbe(const audio::Waveform& x, const LfbeConfig& config = {});

/// Per-utterance, per-bin standardization; constant bins map to zero
/// (variance floor 1e-8). Requires at least two frames.
FeatureMatrix normalize(const FeatureMatrix& f);

/// Per-frame mean over the 64 bins.
Envelope envelope(const FeatureMatrix& f);

} // namespace arbiter::feat
