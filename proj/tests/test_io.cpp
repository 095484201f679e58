#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "arbiter/checkpoint.hpp"
#include "arbiter/errors.hpp"
#include "arbiter/manifest.hpp"
#include "arbiter/neural_core.hpp"
#include "arbiter/rng.hpp"
#include "arbiter/scene_sampler.hpp"
#include "arbiter/wav.hpp"

using namespace arbiter;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST_CASE("float32 wav roundtrips exactly") {
    TempDir dir("wav_test");
    wav::WavData data;
    data.sample_rate = 16000.0;
    data.channels = 1;
    rng::Generator gen(1);
    data.samples.resize(1000);
    for (auto& v : data.samples) v = static_cast<float>(gen.normal());

    const std::string path = (dir.path / "mono.wav").string();
    wav::write(path, data);
    const wav::WavData back = wav::read(path);
    CHECK(back.sample_rate == 16000.0);
    CHECK(back.channels == 1);
    REQUIRE(back.samples.size() == data.samples.size());
    CHECK(back.samples == data.samples);
}

TEST_CASE("multichannel wav preserves channel separation") {
    TempDir dir("wav_test_mc");
    wav::WavData data;
    data.sample_rate = 16000.0;
    data.channels = 3;
    data.samples.resize(300);
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        data.samples[i] = static_cast<float>(i % 3) + static_cast<float>(i / 3) * 0.001f;
    }
    const std::string path = (dir.path / "multi.wav").string();
    wav::write(path, data);
    const wav::WavData back = wav::read(path);
    REQUIRE(back.channels == 3);
    const auto c1 = back.channel(1);
    REQUIRE(c1.size() == 100);
    CHECK(c1[7] == doctest::Approx(1.007).epsilon(1e-6));
}

TEST_CASE("pcm16 wav files are readable") {
    TempDir dir("wav_test_pcm");
    // Hand-assembled minimal PCM16 file.
    std::string buf;
    auto put32 = [&](std::uint32_t v) { buf.append(reinterpret_cast<const char*>(&v), 4); };
    auto put16 = [&](std::uint16_t v) { buf.append(reinterpret_cast<const char*>(&v), 2); };
    buf += "RIFF";
    put32(36 + 8);
    buf += "WAVEfmt ";
    put32(16);
    put16(1);
    put16(1);
    put32(8000);
    put32(16000);
    put16(2);
    put16(16);
    buf += "data";
    put32(8);
    const std::int16_t samples[4] = {0, 16384, -16384, 32767};
    buf.append(reinterpret_cast<const char*>(samples), 8);

    const std::string path = (dir.path / "pcm.wav").string();
    std::ofstream(path, std::ios::binary) << buf;
    const wav::WavData back = wav::read(path);
    CHECK(back.sample_rate == 8000.0);
    REQUIRE(back.samples.size() == 4);
    CHECK(back.samples[1] == doctest::Approx(0.5));
    CHECK(back.samples[2] == doctest::Approx(-0.5));
}

TEST_CASE("scene manifests roundtrip byte-identically") {
    TempDir dir("scene_manifest_test");
    std::vector<scene::SceneSpec> scenes;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        scenes.push_back(scene::sample_scene(scene::SamplingConfig{}, seed));
    }
    const std::string path = (dir.path / "scenes.jsonl").string();
    io::write_scene_manifest(path, scenes);
    const auto back = io::read_scene_manifest(path);
    REQUIRE(back.size() == scenes.size());
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        CHECK(io::scene_to_json_line(back[i]) == io::scene_to_json_line(scenes[i]));
    }
    // And the file itself is stable across rewrites.
    const std::string path2 = (dir.path / "scenes2.jsonl").string();
    io::write_scene_manifest(path2, back);
    std::ifstream f1(path), f2(path2);
    const std::string c1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string c2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(c1 == c2);
}

TEST_CASE("dataset records roundtrip and load audio in both layouts") {
    TempDir dir("record_test");
    const scene::SceneSpec spec = scene::sample_scene(scene::SamplingConfig{}, 3);
    const std::size_t n_dev = spec.device_positions.size();

    // Per-device files.
    io::ScenarioRecord rec;
    rec.id = 7;
    rec.scene = spec;
    rec.label = spec.label;
    rng::Generator gen(5);
    std::vector<std::vector<double>> waves(n_dev);
    for (std::size_t d = 0; d < n_dev; ++d) {
        waves[d].resize(400);
        for (auto& v : waves[d]) v = static_cast<float>(gen.normal());
        wav::WavData mono{16000.0, 1, waves[d]};
        const std::string name = "d" + std::to_string(d) + ".wav";
        wav::write((dir.path / name).string(), mono);
        rec.audio_paths.push_back(name);
    }

    const std::string line = io::record_to_json_line(rec);
    const io::ScenarioRecord parsed = io::record_from_json_line(line);
    CHECK(parsed.id == 7);
    CHECK(parsed.label == rec.label);
    CHECK(parsed.audio_paths == rec.audio_paths);

    const auto loaded = io::load_record_audio(parsed, dir.path.string());
    REQUIRE(loaded.size() == n_dev);
    CHECK(loaded[0].samples == waves[0]);

    // Packed layout of the same data.
    io::ScenarioRecord packed_rec;
    packed_rec.id = 8;
    packed_rec.scene = spec;
    packed_rec.label = spec.label;
    wav::WavData packed;
    packed.sample_rate = 16000.0;
    packed.channels = static_cast<int>(n_dev);
    packed.samples.resize(400 * n_dev);
    for (std::size_t i = 0; i < 400; ++i) {
        for (std::size_t d = 0; d < n_dev; ++d) packed.samples[i * n_dev + d] = waves[d][i];
    }
    wav::write((dir.path / "packed.wav").string(), packed);
    packed_rec.packed_path = "packed.wav";

    const auto packed_loaded = io::load_record_audio(packed_rec, dir.path.string());
    REQUIRE(packed_loaded.size() == n_dev);
    for (std::size_t d = 0; d < n_dev; ++d) {
        REQUIRE(packed_loaded[d].samples == loaded[d].samples);
    }
}

TEST_CASE("feature cache header and payload roundtrip") {
    TempDir dir("feat_cache_test");
    feat::FeatureMatrix f;
    f.frames = 9;
    f.bins = 64;
    f.normalized = true;
    rng::Generator gen(6);
    f.values.resize(9 * 64);
    for (auto& v : f.values) v = gen.normal();

    const std::string path = (dir.path / "x.feat").string();
    io::write_feature_file(path, f);
    const feat::FeatureMatrix back = io::read_feature_file(path);
    CHECK(back.frames == 9);
    CHECK(back.bins == 64);
    CHECK(back.normalized);
    for (std::size_t i = 0; i < f.values.size(); ++i) {
        REQUIRE(back.values[i] == static_cast<double>(static_cast<float>(f.values[i])));
    }

    // Magic check.
    std::ifstream in(path, std::ios::binary);
    char magic[4];
    in.read(magic, 4);
    CHECK(std::memcmp(magic, "ARBF", 4) == 0);

    std::ofstream(path, std::ios::binary | std::ios::trunc) << "garbage";
    CHECK_THROWS_AS(io::read_feature_file(path), IoError);
}

TEST_CASE("checkpoints roundtrip parameters, buffers, and metadata") {
    TempDir dir("ckpt_test");
    nn::ClassifierModel model(nn::ModelConfig::tiny_preset(), 11);

    io::CheckpointMeta meta;
    meta.config_json = "{\"note\":\"test\"}";
    meta.step = 42;
    meta.val_loss = 0.625; // exactly representable
    const std::string path = (dir.path / "m.ckpt").string();
    io::save_checkpoint(path, model.store(), meta);

    nn::ClassifierModel other(nn::ModelConfig::tiny_preset(), 99);
    const io::CheckpointMeta back = io::load_checkpoint(path, other.store());
    CHECK(back.step == 42);
    CHECK(back.val_loss == 0.625);
    CHECK(back.config_json == meta.config_json);

    for (std::size_t i = 0; i < model.store().params().size(); ++i) {
        const auto& a = model.store().params()[i];
        const auto& b = other.store().params()[i];
        REQUIRE(a->name == b->name);
        for (std::size_t k = 0; k < a->value.v.size(); ++k) {
            REQUIRE(b->value.v[k] == static_cast<double>(static_cast<float>(a->value.v[k])));
        }
    }
}

TEST_CASE("prefix loading initializes only the encoder") {
    TempDir dir("ckpt_prefix_test");
    nn::PretrainModel pretrain(nn::ModelConfig::tiny_preset(), 21, false);
    io::CheckpointMeta meta;
    const std::string path = (dir.path / "p.ckpt").string();
    io::save_checkpoint(path, pretrain.store(), meta);

    nn::ClassifierModel target(nn::ModelConfig::tiny_preset(), 22);
    const auto before_clf = target.store().find("classifier.head1.w")->value.v;
    const std::size_t copied = io::load_checkpoint_prefix(path, target.store(), "encoder.");
    CHECK(copied > 0);
    CHECK(target.store().find("classifier.head1.w")->value.v == before_clf);

    const auto* src = pretrain.store().find("encoder.pair0.conv1.w");
    const auto* dst = target.store().find("encoder.pair0.conv1.w");
    REQUIRE(src != nullptr);
    REQUIRE(dst != nullptr);
    for (std::size_t k = 0; k < src->value.v.size(); ++k) {
        REQUIRE(dst->value.v[k] == static_cast<double>(static_cast<float>(src->value.v[k])));
    }
}

TEST_CASE("corrupt checkpoints are rejected") {
    TempDir dir("ckpt_bad_test");
    const std::string path = (dir.path / "bad.ckpt").string();
    std::ofstream(path, std::ios::binary) << "NOPE";
    nn::ClassifierModel model(nn::ModelConfig::tiny_preset(), 1);
    CHECK_THROWS_AS(io::load_checkpoint(path, model.store()), IoError);
    CHECK_THROWS_AS(io::read_checkpoint_meta((dir.path / "missing.ckpt").string()), IoError);
}
