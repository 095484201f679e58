#pragma once

#include <optional>
#include <string>
#include <vector>

#include "arbiter/geometry.hpp"

namespace arbiter::rir {

/// Sampled impulse response between one source and one microphone.
struct RoomImpulseResponse {
    double sample_rate = 16000.0;
    std::vector<double> taps;
    Vec3 source;
    Vec3 mic;
    double rt60_target = 0.0; // seconds
    double direct_delay = 0.0; // fractional samples, sample_rate * |source-mic| / c
};

struct ImageSource {
    Vec3 position;
    int reflection_count = 0;
};

/// How the uniform wall absorption is derived from the target RT60.
///
/// sabine/eyring are the classical closed forms. matched (the default)
/// numerically inverts the decay a shoebox image lattice actually produces:
/// reflection counts disperse across directions (grazing paths along long
/// dimensions decay slowest), so a Schroeder fit on an ISM tail reads
/// consistently longer than the Eyring mean-rate prediction. The matched
/// model integrates that dispersion over the sphere and bisects for the
/// absorption whose predicted Schroeder fit equals the target.
enum class AbsorptionModel { sabine, eyring, matched };

struct RirParams {
    double sample_rate = 16000.0;
    double speed_of_sound = 343.0; // m/s
    int interp_taps = 81;          // windowed-sinc fractional delay width, odd
    AbsorptionModel absorption = AbsorptionModel::matched;
    double tail_margin_s = 0.05;   // image cutoff beyond rt60
    double alpha_min = 0.01;
    std::optional<double> force_alpha; // bypass rt60-derived absorption
    // Classical 100 Hz high-pass. Every image arrives with positive
    // amplitude, so the dense late tail otherwise sums coherently into a
    // low-frequency pile-up that corrupts the measured decay.
    bool highpass = true;
    double highpass_hz = 100.0;
};

/// Sabine inversion: alpha = 0.161 V / (S * rt60), clamped to [0.01, 1].
/// Uniform across all six surfaces. Throws on non-positive inputs.
double absorption_from_rt60(const RoomDims& room_dims, double rt60);

/// Absorption for synthesis under the configured model. Exposed so a scene
/// renderer can resolve it once per (room, rt60) and reuse it for every
/// source/mic pair via force_alpha.
double absorption_for_target(const RoomDims& room_dims, double rt60, const RirParams& params);

/// All shoebox mirror images with total reflection count <= max_order.
/// Throws if the source lies outside the room.
std::vector<ImageSource> enumerate_images(const RoomDims& room_dims, const Vec3& source,
                                          int max_order);

/// Image-source synthesis. Each image contributes a Hann-windowed sinc
/// fractional-delay kernel at its propagation delay with amplitude
/// beta^reflections / (4 pi d), beta = sqrt(1 - alpha). Orders are included
/// up to the smallest order whose images all lie beyond c*(rt60 + tail).
RoomImpulseResponse synthesize_rir(const RoomDims& room_dims, const Vec3& source,
                                   const Vec3& mic, double rt60, const RirParams& params);

/// Convenience overload with default parameters at the given rate.
RoomImpulseResponse synthesize_rir(const RoomDims& room_dims, const Vec3& source,
                                   const Vec3& mic, double rt60, double sample_rate);

/**
 * Optional on-disk RIR cache: one float32 tap file per (room, source, mic,
 * rt60, params) tuple, keyed by a content hash of the inputs. Cached taps are
 * rounded through float32 on first compute as well, so hits and misses return
 * identical values.
 */
class RirCache {
public:
    explicit RirCache(std::string directory);

    RoomImpulseResponse get(const RoomDims& room_dims, const Vec3& source, const Vec3& mic,
                            double rt60, const RirParams& params);

    const std::string& directory() const { return dir_; }

private:
    std::string dir_;
};

} // namespace arbiter::rir
