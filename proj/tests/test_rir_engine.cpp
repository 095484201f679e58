#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <set>

#include "arbiter/errors.hpp"
#include "arbiter/rir_engine.hpp"
#include "arbiter/rng.hpp"
#include "test_helpers.hpp"

using namespace arbiter;

namespace {

// Brute-force Allen-Berkley lattice enumeration: position (1-2q)s + 2mL per
// axis, per-axis reflection count |m - q| + |m|.
std::vector<rir::ImageSource> brute_force_images(const RoomDims& room, const Vec3& source,
                                                 int max_order) {
    std::vector<rir::ImageSource> out;
    const int m_span = max_order + 1;
    const double s[3] = {source.x, source.y, source.z};
    for (int mx = -m_span; mx <= m_span; ++mx) {
        for (int qx = 0; qx <= 1; ++qx) {
            const int cx = std::abs(mx - qx) + std::abs(mx);
            if (cx > max_order) continue;
            for (int my = -m_span; my <= m_span; ++my) {
                for (int qy = 0; qy <= 1; ++qy) {
                    const int cy = std::abs(my - qy) + std::abs(my);
                    if (cx + cy > max_order) continue;
                    for (int mz = -m_span; mz <= m_span; ++mz) {
                        for (int qz = 0; qz <= 1; ++qz) {
                            const int cz = std::abs(mz - qz) + std::abs(mz);
                            if (cx + cy + cz > max_order) continue;
                            out.push_back({{(1 - 2 * qx) * s[0] + 2.0 * mx * room[0],
                                            (1 - 2 * qy) * s[1] + 2.0 * my * room[1],
                                            (1 - 2 * qz) * s[2] + 2.0 * mz * room[2]},
                                           cx + cy + cz});
                        }
                    }
                }
            }
        }
    }
    return out;
}

std::multiset<std::tuple<long, long, long, int>> image_key_set(
    const std::vector<rir::ImageSource>& images) {
    std::multiset<std::tuple<long, long, long, int>> keys;
    for (const auto& im : images) {
        keys.insert({std::llround(im.position.x * 1e6), std::llround(im.position.y * 1e6),
                     std::llround(im.position.z * 1e6), im.reflection_count});
    }
    return keys;
}

} // namespace

TEST_CASE("Sabine inversion matches direct arithmetic") {
    const RoomDims room{5.0, 4.0, 3.0};
    const double expected = 0.161 * 60.0 / (94.0 * 0.3);
    CHECK(rir::absorption_from_rt60(room, 0.3) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("absorption clamps at 0.01 for very long rt60") {
    CHECK(rir::absorption_from_rt60({5.0, 4.0, 3.0}, 1e6) == doctest::Approx(0.01));
}

TEST_CASE("absorption reaches 1.0 exactly when Sabine says so") {
    const double rt60 = 0.161 * 60.0 / 94.0;
    CHECK(rir::absorption_from_rt60({5.0, 4.0, 3.0}, rt60) == doctest::Approx(1.0));
}

TEST_CASE("absorption rejects non-positive inputs") {
    CHECK_THROWS_AS(rir::absorption_from_rt60({5.0, 4.0, 3.0}, 0.0), Error);
    CHECK_THROWS_AS(rir::absorption_from_rt60({0.0, 4.0, 3.0}, 0.5), Error);
}

TEST_CASE("order zero enumeration is the source itself") {
    const auto images = rir::enumerate_images({4.0, 5.0, 3.0}, {1.0, 2.0, 1.5}, 0);
    REQUIRE(images.size() == 1);
    CHECK(images[0].reflection_count == 0);
    CHECK(images[0].position == Vec3{1.0, 2.0, 1.5});
}

TEST_CASE("first-order images include the x=0 mirror") {
    const auto images = rir::enumerate_images({4.0, 5.0, 3.0}, {1.0, 2.0, 1.5}, 1);
    CHECK(images.size() == 7);
    bool found = false;
    for (const auto& im : images) {
        if (im.position == Vec3{-1.0, 2.0, 1.5}) {
            CHECK(im.reflection_count == 1);
            found = true;
        }
    }
    CHECK(found);
}

TEST_CASE("enumeration matches brute force for orders <= 3 on random rooms") {
    rng::Generator gen(404);
    for (int trial = 0; trial < 20; ++trial) {
        const RoomDims room{gen.uniform(3.0, 9.0), gen.uniform(3.0, 9.0), gen.uniform(2.5, 5.0)};
        const Vec3 source{gen.uniform(0.3, room[0] - 0.3), gen.uniform(0.3, room[1] - 0.3),
                          gen.uniform(0.3, room[2] - 0.3)};
        for (int order = 0; order <= 3; ++order) {
            const auto ours = rir::enumerate_images(room, source, order);
            const auto brute = brute_force_images(room, source, order);
            REQUIRE(ours.size() == brute.size());
            REQUIRE(image_key_set(ours) == image_key_set(brute));
        }
    }
}

TEST_CASE("enumerate_images rejects outside sources") {
    CHECK_THROWS_AS(rir::enumerate_images({4.0, 5.0, 3.0}, {-1.0, 2.0, 1.5}, 1), Error);
}

TEST_CASE("forced full absorption leaves only the direct path") {
    // Geometry chosen so the direct delay is exactly 160 samples. The
    // high-pass is off so the raw kernel identity is visible.
    const RoomDims room{10.0, 10.0, 5.0};
    const Vec3 source{2.0, 5.0, 2.5};
    const Vec3 mic{5.43, 5.0, 2.5};
    rir::RirParams params;
    params.force_alpha = 1.0;
    params.highpass = false;
    const auto rir = rir::synthesize_rir(room, source, mic, 0.25, params);

    const double d = 3.43;
    CHECK(rir.direct_delay == doctest::Approx(16000.0 * d / 343.0));
    const double expected_peak = 1.0 / (4.0 * std::numbers::pi * d);
    CHECK(rir.taps[160] == doctest::Approx(expected_peak).epsilon(1e-9));

    // Everything before the interpolation window is silent; only the one
    // kernel is present.
    for (int i = 0; i < 120; ++i) CHECK(rir.taps[static_cast<std::size_t>(i)] == 0.0);
    for (std::size_t i = 210; i < rir.taps.size(); ++i) CHECK(rir.taps[i] == 0.0);
}

TEST_CASE("tap length covers the target rt60") {
    const auto rir = rir::synthesize_rir({6.0, 5.0, 3.0}, {1.0, 1.0, 1.0}, {4.0, 3.0, 1.5},
                                         0.4, 16000.0);
    CHECK(rir.taps.size() >= static_cast<std::size_t>(std::ceil(0.4 * 16000.0)));
}

TEST_CASE("direct-path peak distance scaling is 1/d") {
    const RoomDims room{20.0, 10.0, 5.0};
    const Vec3 source{2.0, 5.0, 2.5};
    rir::RirParams params;
    params.force_alpha = 1.0;
    // Both distances give exact integer sample delays (d = 3.43 and 6.86).
    const auto near = rir::synthesize_rir(room, source, {5.43, 5.0, 2.5}, 0.2, params);
    const auto far = rir::synthesize_rir(room, source, {8.86, 5.0, 2.5}, 0.2, params);
    const double peak_near = *std::max_element(near.taps.begin(), near.taps.end());
    const double peak_far = *std::max_element(far.taps.begin(), far.taps.end());
    CHECK(peak_far == doctest::Approx(peak_near / 2.0).epsilon(0.01));
}

TEST_CASE("inter-mic delay difference matches geometry within one sample") {
    rng::Generator gen(777);
    for (int trial = 0; trial < 20; ++trial) {
        const RoomDims room{gen.uniform(5.0, 10.0), gen.uniform(5.0, 10.0), gen.uniform(2.5, 5.0)};
        const Vec3 source{gen.uniform(1.0, room[0] - 1.0), gen.uniform(1.0, room[1] - 1.0),
                          gen.uniform(1.0, room[2] - 1.0)};
        auto sample_mic = [&]() {
            return Vec3{gen.uniform(0.8, room[0] - 0.8), gen.uniform(0.8, room[1] - 0.8),
                        gen.uniform(0.8, room[2] - 0.8)};
        };
        const Vec3 mic1 = sample_mic();
        const Vec3 mic2 = sample_mic();
        if (distance(source, mic1) < 0.2 || distance(source, mic2) < 0.2) continue;

        rir::RirParams params;
        params.force_alpha = 1.0;
        const auto r1 = rir::synthesize_rir(room, source, mic1, 0.2, params);
        const auto r2 = rir::synthesize_rir(room, source, mic2, 0.2, params);
        const auto peak_pos = [](const std::vector<double>& taps) {
            return static_cast<double>(
                std::max_element(taps.begin(), taps.end()) - taps.begin());
        };
        const double measured = peak_pos(r1.taps) - peak_pos(r2.taps);
        const double expected =
            16000.0 * (distance(source, mic1) - distance(source, mic2)) / 343.0;
        CHECK(std::abs(measured - expected) <= 1.0);
    }
}

TEST_CASE("total energy never increases with absorption") {
    const RoomDims room{6.0, 5.0, 3.0};
    const Vec3 source{1.5, 2.0, 1.5};
    const Vec3 mic{4.5, 3.5, 1.2};
    double prev_energy = 1e300;
    for (const double alpha : {0.1, 0.3, 0.5, 0.7, 0.9, 1.0}) {
        rir::RirParams params;
        params.force_alpha = alpha;
        const auto rir = rir::synthesize_rir(room, source, mic, 0.4, params);
        double energy = 0.0;
        for (double t : rir.taps) energy += t * t;
        CHECK(energy <= prev_energy + 1e-12);
        prev_energy = energy;
    }
}

TEST_CASE("identical inputs give bit-identical taps") {
    const auto a = rir::synthesize_rir({6.0, 5.0, 3.0}, {1.0, 1.0, 1.0}, {4.0, 3.0, 1.5},
                                       0.35, 16000.0);
    const auto b = rir::synthesize_rir({6.0, 5.0, 3.0}, {1.0, 1.0, 1.0}, {4.0, 3.0, 1.5},
                                       0.35, 16000.0);
    REQUIRE(a.taps.size() == b.taps.size());
    CHECK(std::equal(a.taps.begin(), a.taps.end(), b.taps.begin()));
}

TEST_CASE("Schroeder T60 estimate lands near the target (smoke)") {
    rng::Generator gen(99);
    int hits = 0;
    for (int trial = 0; trial < 5; ++trial) {
        const RoomDims room{gen.uniform(4.0, 8.0), gen.uniform(4.0, 8.0), gen.uniform(2.5, 4.0)};
        const Vec3 source{gen.uniform(1.0, room[0] - 1.0), gen.uniform(1.0, room[1] - 1.0),
                          gen.uniform(0.8, room[2] - 0.8)};
        const Vec3 mic{gen.uniform(1.0, room[0] - 1.0), gen.uniform(1.0, room[1] - 1.0),
                       gen.uniform(0.8, room[2] - 0.8)};
        const double rt60 = gen.uniform(0.3, 0.6);
        const auto rir = rir::synthesize_rir(room, source, mic, rt60, 16000.0);
        const double est = oracle::schroeder_t60(rir.taps, 16000.0);
        if (std::abs(est - rt60) / rt60 <= 0.2) ++hits;
    }
    CHECK(hits >= 4);
}

TEST_CASE("coincident source and mic are rejected") {
    CHECK_THROWS_AS(rir::synthesize_rir({6.0, 5.0, 3.0}, {1.0, 1.0, 1.0}, {1.0, 1.0, 1.005},
                                        0.3, 16000.0),
                    Error);
}

TEST_CASE("RIR cache returns identical taps on hit and miss") {
    const std::string dir = "rir_cache_test";
    std::filesystem::remove_all(dir);
    rir::RirCache cache(dir);
    rir::RirParams params;
    const RoomDims room{6.0, 5.0, 3.0};
    const auto first = cache.get(room, {1.0, 1.0, 1.0}, {4.0, 3.0, 1.5}, 0.3, params);
    const auto second = cache.get(room, {1.0, 1.0, 1.0}, {4.0, 3.0, 1.5}, 0.3, params);
    REQUIRE(first.taps.size() == second.taps.size());
    CHECK(std::equal(first.taps.begin(), first.taps.end(), second.taps.begin()));
    std::filesystem::remove_all(dir);
}
