#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace arbiter::wav {

/// Interleaved multi-channel audio as read from / written to a WAV file.
struct WavData {
    double sample_rate = 16000.0;
    int channels = 1;
    std::vector<double> samples; // interleaved, frames * channels

    std::size_t frames() const {
        return channels > 0 ? samples.size() / static_cast<std::size_t>(channels) : 0;
    }

    std::vector<double> channel(int c) const;
};

/// Writes IEEE float32 WAV (format tag 3).
void write(const std::string& path, const WavData& data);

/// Reads PCM16 or float32 WAV.
WavData read(const std::string& path);

} // namespace arbiter::wav
