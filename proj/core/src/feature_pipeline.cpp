#include "arbiter/feature_pipeline.hpp"

#include <cmath>

#include "arbiter/dsp.hpp"
#include "arbiter/errors.hpp"

namespace arbiter::feat {

int frame_count(std::size_t num_samples, int frame_size, int hop) {
    if (num_samples < static_cast<std::size_t>(frame_size)) return 0;
    return 1 + static_cast<int>((num_samples - static_cast<std::size_t>(frame_size)) /
                                static_cast<std::size_t>(hop));
}

double MelFilterbank::hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double MelFilterbank::mel_to_hz(double mel) {
    return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

MelFilterbank::MelFilterbank(const LfbeConfig& config)
    : bins_(config.bins), spectrum_size_(config.fft_size / 2 + 1) {
    const double mel_lo = hz_to_mel(config.fmin_hz);
    const double mel_hi = hz_to_mel(config.fmax_hz);
    // bins + 2 edges, linear in mel.
    std::vector<double> edges(static_cast<std::size_t>(bins_) + 2);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        edges[i] = mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                static_cast<double>(bins_ + 1);
    }
    centers_hz_.resize(static_cast<std::size_t>(bins_));
    for (int b = 0; b < bins_; ++b) centers_hz_[static_cast<std::size_t>(b)] = mel_to_hz(edges[static_cast<std::size_t>(b) + 1]);

    const double bin_width_hz = config.sample_rate / static_cast<double>(config.fft_size);
    weights_.assign(static_cast<std::size_t>(bins_) * static_cast<std::size_t>(spectrum_size_), 0.0);
    for (int b = 0; b < bins_; ++b) {
        const double left = edges[static_cast<std::size_t>(b)];
        const double center = edges[static_cast<std::size_t>(b) + 1];
        const double right = edges[static_cast<std::size_t>(b) + 2];
        for (int k = 0; k < spectrum_size_; ++k) {
            const double mel = hz_to_mel(bin_width_hz * static_cast<double>(k));
            double w = 0.0;
            if (mel > left && mel < right) {
                w = mel <= center ? (mel - left) / (center - left)
                                  : (right - mel) / (right - center);
            }
            weights_[static_cast<std::size_t>(b) * static_cast<std::size_t>(spectrum_size_) +
                     static_cast<std::size_t>(k)] = w;
        }
    }
}

std::vector<double> MelFilterbank::apply(const std::vector<double>& power) const {
    if (power.size() != static_cast<std::size_t>(spectrum_size_)) {
        throw Error("MelFilterbank::apply: spectrum size mismatch");
    }
    std::vector<double> out(static_cast<std::size_t>(bins_), 0.0);
    for (int b = 0; b < bins_; ++b) {
        const double* w = &weights_[static_cast<std::size_t>(b) * static_cast<std::size_t>(spectrum_size_)];
        double acc = 0.0;
        for (int k = 0; k < spectrum_size_; ++k) acc += w[k] * power[static_cast<std::size_t>(k)];
        out[static_cast<std::size_t>(b)] = acc;
    }
    return out;
}

FeatureMatrix lfbe(const audio::Waveform& x, const LfbeConfig& config) {
    if (x.sample_rate != config.sample_rate) {
        throw Error("lfbe: waveform sample rate does not match config");
    }
    if (x.samples.size() < static_cast<std::size_t>(config.frame_size)) {
        throw Error("lfbe: input shorter than one frame");
    }

    const MelFilterbank bank(config);
    const std::vector<double> window = dsp::hann_window(static_cast<std::size_t>(config.frame_size));

    FeatureMatrix f;
    f.frames = frame_count(x.samples.size(), config.frame_size, config.hop);
    f.bins = config.bins;
    f.frame_size = config.frame_size;
    f.hop = config.hop;
    f.normalized = false;
    f.values.resize(static_cast<std::size_t>(f.frames) * static_cast<std::size_t>(f.bins));

    std::vector<double> frame(static_cast<std::size_t>(config.frame_size));
    for (int k = 0; k < f.frames; ++k) {
        const std::size_t start = static_cast<std::size_t>(k) * static_cast<std::size_t>(config.hop);
        for (int i = 0; i < config.frame_size; ++i) {
            frame[static_cast<std::size_t>(i)] =
                x.samples[start + static_cast<std::size_t>(i)] * window[static_cast<std::size_t>(i)];
        }
        const std::vector<double> power =
            dsp::power_spectrum(frame, static_cast<std::size_t>(config.fft_size));
        const std::vector<double> mel = bank.apply(power);
        for (int b = 0; b < config.bins; ++b) {
            f.at(k, b) = std::log(std::max(mel[static_cast<std::size_t>(b)], config.floor));
        }
    }
    return f;
}

FeatureMatrix normalize(const FeatureMatrix& f) {
    if (f.frames < 2) throw Error("normalize: need at least two frames");
    FeatureMatrix out = f;
    out.normalized = true;
    const double inv_frames = 1.0 / static_cast<double>(f.frames);
    for (int b = 0; b < f.bins; ++b) {
        double mean = 0.0;
        for (int k = 0; k < f.frames; ++k) mean += f.at(k, b);
        mean *= inv_frames;
        double var = 0.0;
        for (int k = 0; k < f.frames; ++k) {
            const double d = f.at(k, b) - mean;
            var += d * d;
        }
        var *= inv_frames;
        const double inv_std = 1.0 / std::sqrt(std::max(var, 1e-8));
        for (int k = 0; k < f.frames; ++k) out.at(k, b) = (f.at(k, b) - mean) * inv_std;
    }
    return out;
}

Envelope envelope(const FeatureMatrix& f) {
    Envelope env;
    env.values.resize(static_cast<std::size_t>(f.frames));
    const double inv_bins = 1.0 / static_cast<double>(f.bins);
    for (int k = 0; k < f.frames; ++k) {
        double acc = 0.0;
        for (int b = 0; b < f.bins; ++b) acc += f.at(k, b);
        env.values[static_cast<std::size_t>(k)] = acc * inv_bins;
    }
    return env;
}

} // namespace arbiter::feat
