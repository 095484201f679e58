#include "arbiter/rir_engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>

#include "arbiter/dsp.hpp"
#include "arbiter/errors.hpp"

namespace arbiter::rir {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSabineConstant = 0.161;
constexpr double kMinSourceMicDistance = 0.01; // 1 cm

void check_room(const RoomDims& room) {
    if (room[0] <= 0.0 || room[1] <= 0.0 || room[2] <= 0.0) {
        throw Error("rir: room dimensions must be positive");
    }
}

// Mirror-image coordinates along one axis for a given per-axis reflection
// count c. c = 0 has one solution (the source coordinate itself); c >= 1 has
// exactly two. Derived from position = (1-2q)s + 2mL with per-axis count
// |m - q| + |m|.
int axis_option_count(int c) { return c == 0 ? 1 : 2; }

double axis_coord(double s, double length, int c, int which) {
    if (c == 0) return s;
    if (c % 2 == 1) {
        return which == 0 ? -s + static_cast<double>(c + 1) * length
                          : -s + static_cast<double>(1 - c) * length;
    }
    return which == 0 ? s + static_cast<double>(c) * length
                      : s - static_cast<double>(c) * length;
}

// Invokes f(position) for every image with total reflection count == order.
template <typename F>
void for_each_image_of_order(const RoomDims& room, const Vec3& source, int order, F&& f) {
    for (int cx = 0; cx <= order; ++cx) {
        for (int cy = 0; cy + cx <= order; ++cy) {
            const int cz = order - cx - cy;
            for (int ix = 0; ix < axis_option_count(cx); ++ix) {
                const double px = axis_coord(source.x, room[0], cx, ix);
                for (int iy = 0; iy < axis_option_count(cy); ++iy) {
                    const double py = axis_coord(source.y, room[1], cy, iy);
                    for (int iz = 0; iz < axis_option_count(cz); ++iz) {
                        const double pz = axis_coord(source.z, room[2], cz, iz);
                        f(Vec3{px, py, pz});
                    }
                }
            }
        }
    }
}

// Lattice decay histogram: image energy (without the reflection factor)
// bucketed by arrival-time bin and reflection count. Lets the bisection
// below evaluate the exact decay curve for any candidate absorption without
// re-enumerating images.
struct DecayHistogram {
    double bin_width_s = 0.002;
    int bins = 0;
    int n_max = 512;
    std::vector<double> cells; // bins x (n_max + 1)

    double& at(int bin, int count) {
        return cells[static_cast<std::size_t>(bin) * static_cast<std::size_t>(n_max + 1) +
                     static_cast<std::size_t>(std::min(count, n_max))];
    }
};

DecayHistogram build_decay_histogram(const RoomDims& room, double rt60, double tail_margin_s,
                                     double speed_of_sound) {
    // Canonical off-center source/mic pair; the fit region is insensitive to
    // the exact placement and one absorption must serve every pair anyway.
    const Vec3 source{0.35 * room[0], 0.45 * room[1], 0.50 * room[2]};
    const Vec3 mic{0.62 * room[0], 0.58 * room[1], 0.40 * room[2]};
    const double cutoff_dist = speed_of_sound * (rt60 + tail_margin_s);

    DecayHistogram hist;
    hist.bins = static_cast<int>(std::ceil((rt60 + tail_margin_s) / hist.bin_width_s)) + 1;
    hist.cells.assign(static_cast<std::size_t>(hist.bins) *
                          static_cast<std::size_t>(hist.n_max + 1),
                      0.0);

    for (int order = 0;; ++order) {
        double order_min_dist = std::numeric_limits<double>::infinity();
        for_each_image_of_order(room, source, order, [&](const Vec3& p) {
            const double d = std::max(distance(p, mic), 1e-3);
            order_min_dist = std::min(order_min_dist, d);
            const int bin = static_cast<int>(d / (speed_of_sound * hist.bin_width_s));
            if (bin >= hist.bins) return;
            hist.at(bin, order) += 1.0 / (16.0 * kPi * kPi * d * d);
        });
        if (order_min_dist > cutoff_dist) break;
    }
    return hist;
}

// Schroeder-fit T60 the lattice would measure at per-reflection energy
// log-decay rho (alpha = 1 - exp(-rho)).
double histogram_t60(const DecayHistogram& hist, double rho) {
    std::vector<double> weight(static_cast<std::size_t>(hist.n_max + 1));
    for (int n = 0; n <= hist.n_max; ++n) weight[static_cast<std::size_t>(n)] = std::exp(-rho * n);

    std::vector<double> p(static_cast<std::size_t>(hist.bins), 0.0);
    for (int b = 0; b < hist.bins; ++b) {
        const double* row = &hist.cells[static_cast<std::size_t>(b) *
                                        static_cast<std::size_t>(hist.n_max + 1)];
        double acc = 0.0;
        for (int n = 0; n <= hist.n_max; ++n) acc += row[n] * weight[static_cast<std::size_t>(n)];
        p[static_cast<std::size_t>(b)] = acc;
    }
    std::vector<double> edc(p.size());
    double acc = 0.0;
    for (std::size_t i = p.size(); i-- > 0;) {
        acc += p[i];
        edc[i] = acc;
    }
    if (edc[0] <= 0.0) return 0.0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (std::size_t i = 0; i < edc.size(); ++i) {
        if (edc[i] <= 0.0) break;
        const double db = 10.0 * std::log10(edc[i] / edc[0]);
        if (db <= -5.0 && db >= -25.0) {
            const double t = hist.bin_width_s * (static_cast<double>(i) + 0.5);
            sx += t;
            sy += db;
            sxx += t * t;
            sxy += t * db;
            ++m;
        }
    }
    if (m < 2) return 0.0;
    const double md = static_cast<double>(m);
    const double slope = (md * sxy - sx * sy) / (md * sxx - sx * sx);
    return slope < 0.0 ? -60.0 / slope : 1e9;
}

double matched_absorption(const RoomDims& room, double rt60, double tail_margin_s,
                          double speed_of_sound) {
    const DecayHistogram hist = build_decay_histogram(room, rt60, tail_margin_s, speed_of_sound);
    // Bisect rho: measured T60 is monotone decreasing in rho.
    double lo = 1e-4, hi = 13.8; // alpha from ~1e-4 up to ~1 - 1e-6
    if (histogram_t60(hist, hi) > rt60) return 1.0;
    if (histogram_t60(hist, lo) < rt60) return 1.0 - std::exp(-lo);
    for (int iter = 0; iter < 60; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (histogram_t60(hist, mid) > rt60) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo < 1e-4 * hi) break;
    }
    return 1.0 - std::exp(-0.5 * (lo + hi));
}

double absorption_for_synthesis(const RoomDims& room, double rt60, const RirParams& params) {
    if (params.force_alpha) {
        return std::clamp(*params.force_alpha, 0.0, 1.0);
    }
    const double v = room_volume(room);
    const double s = room_surface_area(room);
    double alpha;
    switch (params.absorption) {
        case AbsorptionModel::sabine:
            alpha = kSabineConstant * v / (s * rt60);
            break;
        case AbsorptionModel::eyring:
            alpha = 1.0 - std::exp(-kSabineConstant * v / (s * rt60));
            break;
        case AbsorptionModel::matched:
        default:
            alpha = matched_absorption(room, rt60, params.tail_margin_s, params.speed_of_sound);
            break;
    }
    return std::clamp(alpha, params.alpha_min, 1.0);
}

} // namespace

double absorption_for_target(const RoomDims& room_dims, double rt60, const RirParams& params) {
    check_room(room_dims);
    if (rt60 <= 0.0) throw Error("absorption_for_target: rt60 must be positive");
    return absorption_for_synthesis(room_dims, rt60, params);
}

double absorption_from_rt60(const RoomDims& room_dims, double rt60) {
    check_room(room_dims);
    if (rt60 <= 0.0) throw Error("absorption_from_rt60: rt60 must be positive");
    const double alpha = kSabineConstant * room_volume(room_dims) /
                         (room_surface_area(room_dims) * rt60);
    return std::clamp(alpha, 0.01, 1.0);
}

std::vector<ImageSource> enumerate_images(const RoomDims& room_dims, const Vec3& source,
                                          int max_order) {
    check_room(room_dims);
    if (!inside_room(room_dims, source)) throw Error("enumerate_images: source outside room");
    if (max_order < 0) throw Error("enumerate_images: max_order must be >= 0");

    std::vector<ImageSource> out;
    for (int order = 0; order <= max_order; ++order) {
        for_each_image_of_order(room_dims, source, order,
                                [&](const Vec3& p) { out.push_back({p, order}); });
    }
    return out;
}

RoomImpulseResponse synthesize_rir(const RoomDims& room_dims, const Vec3& source,
                                   const Vec3& mic, double rt60, const RirParams& params) {
    check_room(room_dims);
    if (!inside_room(room_dims, source)) throw Error("synthesize_rir: source outside room");
    if (!inside_room(room_dims, mic)) throw Error("synthesize_rir: mic outside room");
    if (rt60 <= 0.0) throw Error("synthesize_rir: rt60 must be positive");
    if (params.sample_rate <= 0.0) throw Error("synthesize_rir: sample_rate must be positive");
    if (params.interp_taps < 3 || params.interp_taps % 2 == 0) {
        throw Error("synthesize_rir: interp_taps must be odd and >= 3");
    }
    const double direct_dist = distance(source, mic);
    if (direct_dist < kMinSourceMicDistance) {
        throw Error("synthesize_rir: source and mic closer than 1 cm");
    }

    const double fs = params.sample_rate;
    const double c = params.speed_of_sound;
    const double alpha = absorption_for_synthesis(room_dims, rt60, params);
    const double beta = std::sqrt(1.0 - alpha);
    const int hw = (params.interp_taps - 1) / 2;
    const double cutoff_dist = c * (rt60 + params.tail_margin_s);

    RoomImpulseResponse rir;
    rir.sample_rate = fs;
    rir.source = source;
    rir.mic = mic;
    rir.rt60_target = rt60;
    rir.direct_delay = fs * direct_dist / c;

    std::vector<double>& taps = rir.taps;
    taps.assign(static_cast<std::size_t>(std::ceil(rt60 * fs)), 0.0);

    double beta_pow = 1.0; // beta^order, beta^0 = 1 even when beta = 0
    double max_dist = 0.0;
    for (int order = 0;; ++order) {
        double order_min_dist = std::numeric_limits<double>::infinity();
        for_each_image_of_order(room_dims, source, order, [&](const Vec3& p) {
            const double d = std::max(distance(p, mic), 1e-3);
            order_min_dist = std::min(order_min_dist, d);
            max_dist = std::max(max_dist, d);
            const double amp = beta_pow / (4.0 * kPi * d);
            if (amp == 0.0) return;
            const double delay = fs * d / c;
            const auto n0 = static_cast<std::ptrdiff_t>(std::ceil(delay - hw));
            const auto n1 = static_cast<std::ptrdiff_t>(std::floor(delay + hw));
            if (n1 >= static_cast<std::ptrdiff_t>(taps.size())) {
                taps.resize(static_cast<std::size_t>(n1) + 1, 0.0);
            }
            for (std::ptrdiff_t n = std::max<std::ptrdiff_t>(n0, 0); n <= n1; ++n) {
                const double t = static_cast<double>(n) - delay;
                const double win = 0.5 * (1.0 + std::cos(kPi * t / hw));
                taps[static_cast<std::size_t>(n)] += amp * dsp::sinc(kPi * t) * win;
            }
        });
        // Smallest order whose images all lie beyond the cutoff is the last
        // one included; beta = 0 kills every reflected path outright.
        if (order_min_dist > cutoff_dist || beta == 0.0) break;
        beta_pow *= beta;
    }

    const auto final_len = static_cast<std::size_t>(
        std::ceil(fs * std::max(rt60, max_dist / c)));
    taps.resize(std::max<std::size_t>(final_len, 1), 0.0);

    if (params.highpass) {
        // Allen-Berkley style second-order high-pass at highpass_hz.
        const double w = 2.0 * kPi * params.highpass_hz / fs;
        const double r1 = std::exp(-w);
        const double b1 = 2.0 * r1 * std::cos(w);
        const double b2 = -r1 * r1;
        const double a1 = -(1.0 + r1);
        double y0 = 0.0, y1 = 0.0, y2 = 0.0;
        for (double& tap : taps) {
            const double x0 = tap;
            y2 = y1;
            y1 = y0;
            y0 = b1 * y1 + b2 * y2 + x0;
            tap = y0 + a1 * y1 + r1 * y2;
        }
    }
    return rir;
}

RoomImpulseResponse synthesize_rir(const RoomDims& room_dims, const Vec3& source,
                                   const Vec3& mic, double rt60, double sample_rate) {
    RirParams params;
    params.sample_rate = sample_rate;
    return synthesize_rir(room_dims, source, mic, rt60, params);
}

namespace {

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ull;
    }
    return h;
}

std::uint64_t hash_double(std::uint64_t h, double v) { return fnv1a(&v, sizeof v, h); }

std::uint64_t cache_key(const RoomDims& room, const Vec3& source, const Vec3& mic,
                        double rt60, const RirParams& p) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (double d : room) h = hash_double(h, d);
    for (double d : {source.x, source.y, source.z, mic.x, mic.y, mic.z}) h = hash_double(h, d);
    h = hash_double(h, rt60);
    h = hash_double(h, p.sample_rate);
    h = hash_double(h, p.speed_of_sound);
    h = hash_double(h, static_cast<double>(p.interp_taps));
    h = hash_double(h, static_cast<double>(p.absorption == AbsorptionModel::eyring));
    h = hash_double(h, p.tail_margin_s);
    h = hash_double(h, p.alpha_min);
    h = hash_double(h, p.force_alpha ? *p.force_alpha : -1.0);
    h = hash_double(h, p.highpass ? p.highpass_hz : -1.0);
    return h;
}

} // namespace

RirCache::RirCache(std::string directory) : dir_(std::move(directory)) {
    std::filesystem::create_directories(dir_);
}

RoomImpulseResponse RirCache::get(const RoomDims& room_dims, const Vec3& source,
                                  const Vec3& mic, double rt60, const RirParams& params) {
    char name[32];
    std::snprintf(name, sizeof name, "%016llx.f32",
                  static_cast<unsigned long long>(cache_key(room_dims, source, mic, rt60, params)));
    const std::filesystem::path path = std::filesystem::path(dir_) / name;

    RoomImpulseResponse rir;
    rir.sample_rate = params.sample_rate;
    rir.source = source;
    rir.mic = mic;
    rir.rt60_target = rt60;
    rir.direct_delay = params.sample_rate * distance(source, mic) / params.speed_of_sound;

    if (std::filesystem::exists(path)) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("RirCache: cannot open " + path.string());
        std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        rir.taps.resize(bytes.size() / 4);
        for (std::size_t i = 0; i < rir.taps.size(); ++i) {
            float f;
            std::memcpy(&f, bytes.data() + i * 4, 4);
            rir.taps[i] = static_cast<double>(f);
        }
        return rir;
    }

    RoomImpulseResponse computed = synthesize_rir(room_dims, source, mic, rt60, params);
    // Round through float32 so the first computation matches later cache hits.
    std::vector<float> f32(computed.taps.size());
    for (std::size_t i = 0; i < f32.size(); ++i) {
        f32[i] = static_cast<float>(computed.taps[i]);
        computed.taps[i] = static_cast<double>(f32[i]);
    }
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("RirCache: cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(f32.data()),
                  static_cast<std::streamsize>(f32.size() * 4));
    }
    std::filesystem::rename(tmp, path);
    return computed;
}

} // namespace arbiter::rir
