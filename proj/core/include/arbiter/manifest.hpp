#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "arbiter/audio_synth.hpp"
#include "arbiter/feature_pipeline.hpp"
#include "arbiter/scene_sampler.hpp"

namespace arbiter::io {

/// One dataset row: a scene plus where its rendered audio lives. Audio is
/// either one mono WAV per device or a single multi-channel WAV.
struct ScenarioRecord {
    std::uint64_t id = 0;
    scene::SceneSpec scene;
    std::vector<std::string> audio_paths; // relative to the manifest directory
    std::string packed_path;              // alternative multi-channel layout
    int label = -1;
};

std::string scene_to_json_line(const scene::SceneSpec& spec);
scene::SceneSpec scene_from_json_line(const std::string& line);

/// Scene manifests: one JSON object per line.
void write_scene_manifest(const std::string& path, const std::vector<scene::SceneSpec>& scenes);
std::vector<scene::SceneSpec> read_scene_manifest(const std::string& path);

std::string record_to_json_line(const ScenarioRecord& record);
ScenarioRecord record_from_json_line(const std::string& line);

void write_dataset_manifest(const std::string& path, const std::vector<ScenarioRecord>& records);
std::vector<ScenarioRecord> read_dataset_manifest(const std::string& path);

/// Loads the device waveforms of a record, from either layout.
std::vector<audio::Waveform> load_record_audio(const ScenarioRecord& record,
                                               const std::string& manifest_dir);

/// Feature cache: fixed header (magic, version, frames, bins, normalized)
/// followed by row-major float32 values.
void write_feature_file(const std::string& path, const feat::FeatureMatrix& features);
feat::FeatureMatrix read_feature_file(const std::string& path);

} // namespace arbiter::io
