#include "arbiter/manifest.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "arbiter/errors.hpp"
#include "arbiter/wav.hpp"

namespace arbiter::io {

using nlohmann::json;

namespace {

json vec3_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec3_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3) throw IoError("manifest: expected a 3-element position");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json scene_to_json(const scene::SceneSpec& s) {
    json j;
    j["room_dims"] = json::array({s.room_dims[0], s.room_dims[1], s.room_dims[2]});
    j["rt60"] = s.rt60;
    json devices = json::array();
    for (const auto& p : s.device_positions) devices.push_back(vec3_to_json(p));
    j["device_positions"] = std::move(devices);
    j["speaker_position"] = vec3_to_json(s.speaker_position);
    json noises = json::array();
    for (const auto& p : s.noise_positions) noises.push_back(vec3_to_json(p));
    j["noise_positions"] = std::move(noises);
    j["speech_level_db"] = s.speech_level_db;
    j["noise_level_db"] = s.noise_level_db;
    j["label"] = s.label;
    j["seed"] = s.seed;
    return j;
}

scene::SceneSpec scene_from_json(const json& j) {
    scene::SceneSpec s;
    const auto& dims = j.at("room_dims");
    s.room_dims = {dims.at(0).get<double>(), dims.at(1).get<double>(), dims.at(2).get<double>()};
    s.rt60 = j.at("rt60").get<double>();
    for (const auto& p : j.at("device_positions")) s.device_positions.push_back(vec3_from_json(p));
    s.speaker_position = vec3_from_json(j.at("speaker_position"));
    for (const auto& p : j.at("noise_positions")) s.noise_positions.push_back(vec3_from_json(p));
    s.speech_level_db = j.at("speech_level_db").get<double>();
    s.noise_level_db = j.at("noise_level_db").get<double>();
    s.label = j.at("label").get<int>();
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("manifest: cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

} // namespace

std::string scene_to_json_line(const scene::SceneSpec& spec) { return scene_to_json(spec).dump(); }

scene::SceneSpec scene_from_json_line(const std::string& line) {
    return scene_from_json(json::parse(line));
}

void write_scene_manifest(const std::string& path, const std::vector<scene::SceneSpec>& scenes) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("manifest: cannot write " + path);
    for (const auto& s : scenes) out << scene_to_json_line(s) << '\n';
}

std::vector<scene::SceneSpec> read_scene_manifest(const std::string& path) {
    std::vector<scene::SceneSpec> scenes;
    for (const auto& line : read_lines(path)) scenes.push_back(scene_from_json_line(line));
    return scenes;
}

std::string record_to_json_line(const ScenarioRecord& record) {
    json j;
    j["id"] = record.id;
    j["scene"] = scene_to_json(record.scene);
    j["audio"] = record.audio_paths;
    if (!record.packed_path.empty()) j["packed"] = record.packed_path;
    j["label"] = record.label;
    return j.dump();
}

ScenarioRecord record_from_json_line(const std::string& line) {
    const json j = json::parse(line);
    ScenarioRecord r;
    r.id = j.at("id").get<std::uint64_t>();
    r.scene = scene_from_json(j.at("scene"));
    if (j.contains("audio")) r.audio_paths = j.at("audio").get<std::vector<std::string>>();
    if (j.contains("packed")) r.packed_path = j.at("packed").get<std::string>();
    r.label = j.at("label").get<int>();
    return r;
}

void write_dataset_manifest(const std::string& path, const std::vector<ScenarioRecord>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("manifest: cannot write " + path);
    for (const auto& r : records) out << record_to_json_line(r) << '\n';
}

std::vector<ScenarioRecord> read_dataset_manifest(const std::string& path) {
    std::vector<ScenarioRecord> records;
    for (const auto& line : read_lines(path)) records.push_back(record_from_json_line(line));
    return records;
}

std::vector<audio::Waveform> load_record_audio(const ScenarioRecord& record,
                                               const std::string& manifest_dir) {
    const std::filesystem::path base(manifest_dir);
    std::vector<audio::Waveform> waves;
    if (!record.packed_path.empty()) {
        const wav::WavData packed = wav::read((base / record.packed_path).string());
        waves.reserve(static_cast<std::size_t>(packed.channels));
        for (int c = 0; c < packed.channels; ++c) {
            waves.push_back({packed.channel(c), packed.sample_rate});
        }
    } else {
        waves.reserve(record.audio_paths.size());
        for (const auto& rel : record.audio_paths) {
            const wav::WavData mono = wav::read((base / rel).string());
            if (mono.channels != 1) throw IoError("load_record_audio: expected mono file " + rel);
            waves.push_back({mono.samples, mono.sample_rate});
        }
    }
    if (waves.size() != record.scene.device_positions.size()) {
        throw IoError("load_record_audio: device count mismatch for scenario " +
                      std::to_string(record.id));
    }
    return waves;
}

namespace {
constexpr char kFeatureMagic[4] = {'A', 'R', 'B', 'F'};
constexpr std::uint32_t kFeatureVersion = 1;
} // namespace

void write_feature_file(const std::string& path, const feat::FeatureMatrix& features) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("feature cache: cannot write " + path);
    out.write(kFeatureMagic, 4);
    const std::uint32_t version = kFeatureVersion;
    const auto frames = static_cast<std::uint32_t>(features.frames);
    const auto bins = static_cast<std::uint32_t>(features.bins);
    const std::uint8_t normalized = features.normalized ? 1 : 0;
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&frames), 4);
    out.write(reinterpret_cast<const char*>(&bins), 4);
    out.write(reinterpret_cast<const char*>(&normalized), 1);
    std::vector<float> f32(features.values.size());
    for (std::size_t i = 0; i < f32.size(); ++i) f32[i] = static_cast<float>(features.values[i]);
    out.write(reinterpret_cast<const char*>(f32.data()),
              static_cast<std::streamsize>(f32.size() * 4));
}

feat::FeatureMatrix read_feature_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("feature cache: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kFeatureMagic, 4) != 0) {
        throw IoError("feature cache: bad magic in " + path);
    }
    std::uint32_t version = 0, frames = 0, bins = 0;
    std::uint8_t normalized = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&frames), 4);
    in.read(reinterpret_cast<char*>(&bins), 4);
    in.read(reinterpret_cast<char*>(&normalized), 1);
    if (!in || version != kFeatureVersion) throw IoError("feature cache: bad header in " + path);

    feat::FeatureMatrix f;
    f.frames = static_cast<int>(frames);
    f.bins = static_cast<int>(bins);
    f.normalized = normalized != 0;
    const std::size_t n = static_cast<std::size_t>(frames) * bins;
    std::vector<float> f32(n);
    in.read(reinterpret_cast<char*>(f32.data()), static_cast<std::streamsize>(n * 4));
    if (!in) throw IoError("feature cache: truncated data in " + path);
    f.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) f.values[i] = static_cast<double>(f32[i]);
    return f;
}

} // namespace arbiter::io
