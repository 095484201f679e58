#include <doctest.h>

#include <cmath>

#include "arbiter/errors.hpp"
#include "arbiter/rng.hpp"
#include "arbiter/scene_sampler.hpp"
#include "test_helpers.hpp"

using namespace arbiter;

TEST_CASE("generator is deterministic per seed") {
    rng::Generator a(42), b(42), c(43);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 100; ++i) {
        const auto va = a.next_u64();
        all_equal = all_equal && va == b.next_u64();
        any_diff = any_diff || va != c.next_u64();
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("uniform_int stays in bounds") {
    rng::Generator gen(7);
    for (int i = 0; i < 10000; ++i) {
        const auto v = gen.uniform_int(-3, 5);
        CHECK(v >= -3);
        CHECK(v <= 5);
    }
}

TEST_CASE("derive_seed decorrelates indices") {
    CHECK(rng::derive_seed(1, 0) != rng::derive_seed(1, 1));
    CHECK(rng::derive_seed(1, 0) != rng::derive_seed(2, 0));
    CHECK(rng::derive_seed(5, 9) == rng::derive_seed(5, 9));
}

TEST_CASE("beta(1.1, 3.0) mean matches the closed form within 2%") {
    rng::Generator gen(11);
    const int n = 100000;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += gen.beta(1.1, 3.0);
    const double mean = acc / n;
    const double expected = 1.1 / (1.1 + 3.0);
    CHECK(std::abs(mean - expected) / expected < 0.02);
}

TEST_CASE("poisson(0) is degenerate at zero") {
    rng::Generator gen(3);
    for (int i = 0; i < 100; ++i) CHECK(gen.poisson(0.0) == 0);
}

TEST_CASE("shifted poisson with mean == low always returns low") {
    rng::Generator gen(5);
    const scene::ShiftedPoissonParams params{2.0, 2, 15};
    for (int i = 0; i < 1000; ++i) CHECK(scene::shifted_poisson_sample(params, gen) == 2);
}

TEST_CASE("shifted poisson empirical mean matches the truncated oracle") {
    rng::Generator gen(17);
    const scene::ShiftedPoissonParams params{3.0, 2, 15};
    const int n = 1000000;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += scene::shifted_poisson_sample(params, gen);
    const double mean = acc / n;
    const double expected = oracle::truncated_shifted_poisson_mean(3.0, 2, 15);
    CHECK(std::abs(mean - expected) < 0.01);
}

TEST_CASE("shifted poisson never leaves [low, high]") {
    rng::Generator gen(23);
    const scene::ShiftedPoissonParams params{2.0, 1, 5};
    for (int i = 0; i < 20000; ++i) {
        const int v = scene::shifted_poisson_sample(params, gen);
        CHECK(v >= 1);
        CHECK(v <= 5);
    }
}

TEST_CASE("shifted poisson degenerate low == high skips drawing") {
    rng::Generator gen(29);
    const scene::ShiftedPoissonParams params{4.0, 4, 4};
    CHECK(scene::shifted_poisson_sample(params, gen) == 4);
    rng::Generator untouched(29);
    CHECK(gen.next_u64() == untouched.next_u64());
}

TEST_CASE("invalid shifted poisson params are rejected") {
    rng::Generator gen(1);
    CHECK_THROWS_AS(scene::shifted_poisson_sample({1.0, 2, 1}, gen), Error);
    CHECK_THROWS_AS(scene::shifted_poisson_sample({0.5, 1, 5}, gen), Error);
}

TEST_CASE("gamma sampling has the right mean") {
    rng::Generator gen(31);
    const int n = 50000;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += gen.gamma(2.5);
    CHECK(std::abs(acc / n - 2.5) < 0.05);
}
