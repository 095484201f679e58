#include <cmath>
#include <fstream>

#include <json.hpp>

#include "arbiter/errors.hpp"
#include "arbiter/experiment_harness.hpp"

namespace arbiter::harness {

using nlohmann::json;

namespace {

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void maybe_range(const json& j, const char* key, scene::Range& out) {
    if (j.contains(key)) {
        const auto& a = j.at(key);
        out.low = a.at(0).get<double>();
        out.high = a.at(1).get<double>();
    }
}

void maybe_shifted_poisson(const json& j, const char* key, scene::ShiftedPoissonParams& out) {
    if (j.contains(key)) {
        const auto& p = j.at(key);
        maybe(p, "mean", out.mean);
        maybe(p, "low", out.low);
        maybe(p, "high", out.high);
    }
}

json range_to_json(const scene::Range& r) { return json::array({r.low, r.high}); }

json shifted_poisson_to_json(const scene::ShiftedPoissonParams& p) {
    return json{{"mean", p.mean}, {"low", p.low}, {"high", p.high}};
}

void parse_sampling(const json& j, scene::SamplingConfig& c) {
    maybe_range(j, "room_length_range", c.room_length_range);
    maybe_range(j, "room_width_range", c.room_width_range);
    maybe_range(j, "room_height_range", c.room_height_range);
    maybe(j, "rt60_beta_alpha", c.rt60_beta_alpha);
    maybe(j, "rt60_beta_beta", c.rt60_beta_beta);
    maybe_shifted_poisson(j, "device_count", c.device_count);
    maybe_shifted_poisson(j, "noise_count", c.noise_count);
    maybe_range(j, "speech_level_range", c.speech_level_range);
    maybe_range(j, "noise_level_range", c.noise_level_range);
    maybe(j, "wall_margin", c.wall_margin);
    maybe(j, "min_separation", c.min_separation);
    maybe_range(j, "device_height_range", c.device_height_range);
    maybe_range(j, "speaker_height_range", c.speaker_height_range);
}

json sampling_to_json(const scene::SamplingConfig& c) {
    json j;
    j["room_length_range"] = range_to_json(c.room_length_range);
    j["room_width_range"] = range_to_json(c.room_width_range);
    j["room_height_range"] = range_to_json(c.room_height_range);
    j["rt60_beta_alpha"] = c.rt60_beta_alpha;
    j["rt60_beta_beta"] = c.rt60_beta_beta;
    j["device_count"] = shifted_poisson_to_json(c.device_count);
    j["noise_count"] = shifted_poisson_to_json(c.noise_count);
    j["speech_level_range"] = range_to_json(c.speech_level_range);
    j["noise_level_range"] = range_to_json(c.noise_level_range);
    j["wall_margin"] = c.wall_margin;
    j["min_separation"] = c.min_separation;
    j["device_height_range"] = range_to_json(c.device_height_range);
    j["speaker_height_range"] = range_to_json(c.speaker_height_range);
    return j;
}

void parse_rir(const json& j, rir::RirParams& p) {
    maybe(j, "sample_rate", p.sample_rate);
    maybe(j, "speed_of_sound", p.speed_of_sound);
    maybe(j, "interp_taps", p.interp_taps);
    maybe(j, "tail_margin_s", p.tail_margin_s);
    maybe(j, "alpha_min", p.alpha_min);
    maybe(j, "highpass", p.highpass);
    maybe(j, "highpass_hz", p.highpass_hz);
    if (j.contains("absorption")) {
        const std::string m = j.at("absorption").get<std::string>();
        if (m == "sabine") p.absorption = rir::AbsorptionModel::sabine;
        else if (m == "eyring") p.absorption = rir::AbsorptionModel::eyring;
        else if (m == "matched") p.absorption = rir::AbsorptionModel::matched;
        else throw Error("config: unknown absorption model " + m);
    }
    if (j.contains("force_alpha") && !j.at("force_alpha").is_null()) {
        p.force_alpha = j.at("force_alpha").get<double>();
    }
}

json rir_to_json(const rir::RirParams& p) {
    json j;
    j["sample_rate"] = p.sample_rate;
    j["speed_of_sound"] = p.speed_of_sound;
    j["interp_taps"] = p.interp_taps;
    j["tail_margin_s"] = p.tail_margin_s;
    j["alpha_min"] = p.alpha_min;
    j["highpass"] = p.highpass;
    j["highpass_hz"] = p.highpass_hz;
    j["absorption"] = p.absorption == rir::AbsorptionModel::sabine    ? "sabine"
                      : p.absorption == rir::AbsorptionModel::eyring ? "eyring"
                                                                     : "matched";
    if (p.force_alpha) j["force_alpha"] = *p.force_alpha;
    return j;
}

void parse_training(const json& j, TrainingConfig& c) {
    maybe(j, "steps", c.steps);
    maybe(j, "batch_scenarios", c.batch_scenarios);
    maybe(j, "lr", c.lr);
    maybe(j, "lr_min", c.lr_min);
    maybe(j, "val_fraction", c.val_fraction);
    maybe(j, "checkpoint_interval", c.checkpoint_interval);
    maybe(j, "max_val_scenarios", c.max_val_scenarios);
    maybe(j, "split_epsilon", c.split_epsilon);
    maybe(j, "lambda", c.lambda);
}

json training_to_json(const TrainingConfig& c) {
    json j;
    j["steps"] = c.steps;
    j["batch_scenarios"] = c.batch_scenarios;
    j["lr"] = c.lr;
    j["lr_min"] = c.lr_min;
    j["val_fraction"] = c.val_fraction;
    j["checkpoint_interval"] = c.checkpoint_interval;
    j["max_val_scenarios"] = c.max_val_scenarios;
    j["split_epsilon"] = c.split_epsilon;
    j["lambda"] = c.lambda;
    return j;
}

json transformer_to_json(const nn::TransformerConfig& c) {
    json j;
    j["dim"] = c.dim;
    j["heads"] = c.heads;
    j["layers"] = c.layers;
    j["ffn_hidden"] = c.ffn_hidden;
    j["use_positional"] = c.use_positional;
    return j;
}

nn::TransformerConfig transformer_from_json(const json& j) {
    nn::TransformerConfig c;
    maybe(j, "dim", c.dim);
    maybe(j, "heads", c.heads);
    maybe(j, "layers", c.layers);
    maybe(j, "ffn_hidden", c.ffn_hidden);
    maybe(j, "use_positional", c.use_positional);
    return c;
}

json model_to_json(const nn::ModelConfig& c) {
    json j;
    json e;
    e["conv_layers"] = c.encoder.conv_layers;
    e["stage_channels"] = c.encoder.stage_channels;
    e["stage_strides"] = c.encoder.stage_strides;
    e["kernel_size"] = c.encoder.kernel_size;
    e["embedding_dim"] = c.encoder.embedding_dim;
    e["bn_epsilon"] = c.encoder.bn_epsilon;
    e["bn_momentum"] = c.encoder.bn_momentum;
    j["encoder"] = std::move(e);
    j["summarizer"] = transformer_to_json(c.summarizer);
    j["speech_encoder"] = transformer_to_json(c.speech_encoder);
    j["decoder"] = transformer_to_json(c.decoder);
    j["classifier_attention"] = transformer_to_json(c.classifier_attention);
    j["classifier_summary"] = transformer_to_json(c.classifier_summary);
    j["speech_dim"] = c.speech_dim;
    j["classifier_head_hidden"] = c.classifier_head_hidden;
    j["feature_bins"] = c.feature_bins;
    return j;
}

nn::ModelConfig model_from_json(const json& j) {
    nn::ModelConfig c;
    if (j.contains("encoder")) {
        const auto& e = j.at("encoder");
        maybe(e, "conv_layers", c.encoder.conv_layers);
        maybe(e, "stage_channels", c.encoder.stage_channels);
        maybe(e, "stage_strides", c.encoder.stage_strides);
        maybe(e, "kernel_size", c.encoder.kernel_size);
        maybe(e, "embedding_dim", c.encoder.embedding_dim);
        maybe(e, "bn_epsilon", c.encoder.bn_epsilon);
        maybe(e, "bn_momentum", c.encoder.bn_momentum);
    }
    if (j.contains("summarizer")) c.summarizer = transformer_from_json(j.at("summarizer"));
    if (j.contains("speech_encoder")) c.speech_encoder = transformer_from_json(j.at("speech_encoder"));
    if (j.contains("decoder")) c.decoder = transformer_from_json(j.at("decoder"));
    if (j.contains("classifier_attention")) {
        c.classifier_attention = transformer_from_json(j.at("classifier_attention"));
    }
    if (j.contains("classifier_summary")) {
        c.classifier_summary = transformer_from_json(j.at("classifier_summary"));
    }
    maybe(j, "speech_dim", c.speech_dim);
    maybe(j, "classifier_head_hidden", c.classifier_head_hidden);
    maybe(j, "feature_bins", c.feature_bins);
    return c;
}

nn::ModelConfig preset_by_name(const std::string& name) {
    if (name == "small") return nn::ModelConfig::small_preset();
    if (name == "deep") return nn::ModelConfig::deep_preset();
    if (name == "tiny") return nn::ModelConfig::tiny_preset();
    throw Error("config: unknown model preset " + name);
}

} // namespace

void AudioConfig::validate() const {
    if (duration_s <= 0.0) throw Error("AudioConfig: duration must be positive");
}

void TrainingConfig::validate() const {
    if (steps < 0) throw Error("TrainingConfig: steps must be >= 0");
    if (batch_scenarios < 1) throw Error("TrainingConfig: batch_scenarios must be >= 1");
    if (lr <= 0.0) throw Error("TrainingConfig: lr must be positive");
    if (val_fraction <= 0.0 || val_fraction > 0.5) {
        throw Error("TrainingConfig: val_fraction must be in (0, 0.5]");
    }
    if (checkpoint_interval < 1) throw Error("TrainingConfig: checkpoint_interval must be >= 1");
    if (split_epsilon < 0.0 || split_epsilon >= 0.5) {
        throw Error("TrainingConfig: split_epsilon must be in [0, 0.5)");
    }
    if (lambda < 0.0 || lambda > 1.0) throw Error("TrainingConfig: lambda must be in [0, 1]");
}

void RunConfig::validate() const {
    sampling.validate();
    audio.validate();
    pretrain.validate();
    finetune.validate();
    model.validate();
    if (total_scenarios < 1) throw Error("RunConfig: total_scenarios must be >= 1");
    if (test_scenarios < 1) throw Error("RunConfig: test_scenarios must be >= 1");
    if (subset_exponents.empty()) throw Error("RunConfig: need at least one subset exponent");
    int max_exp = 0;
    for (int e : subset_exponents) {
        if (e < 0) throw Error("RunConfig: subset exponents must be >= 0");
        max_exp = std::max(max_exp, e);
    }
    if (total_scenarios < static_cast<long>(std::pow(4.0, max_exp))) {
        throw Error("RunConfig: total_scenarios < 4^max_exponent");
    }
    if (setups.empty()) throw Error("RunConfig: no setups configured");
    for (const auto& s : setups) {
        if (s != "baseline" && s != "contrastive" && s != "reconstructive" && s != "combo") {
            throw Error("RunConfig: unknown setup " + s);
        }
    }
    if (seeds.empty()) throw Error("RunConfig: no seeds configured");
}

RunConfig default_run_config() {
    RunConfig c;
    c.model = preset_by_name(c.model_preset);
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw IoError("config: parse error in " + path + ": " + e.what());
    }

    RunConfig c = default_run_config();
    if (j.contains("sampling")) parse_sampling(j.at("sampling"), c.sampling);
    if (j.contains("rir")) parse_rir(j.at("rir"), c.rir);
    if (j.contains("audio")) {
        maybe(j.at("audio"), "duration_s", c.audio.duration_s);
        maybe(j.at("audio"), "packed", c.audio.packed);
    }
    maybe(j, "model_preset", c.model_preset);
    c.model = preset_by_name(c.model_preset);
    if (j.contains("model")) c.model = model_from_json(j.at("model"));
    if (j.contains("pretrain")) parse_training(j.at("pretrain"), c.pretrain);
    if (j.contains("finetune")) parse_training(j.at("finetune"), c.finetune);
    if (j.contains("experiment")) {
        const auto& e = j.at("experiment");
        maybe(e, "total_scenarios", c.total_scenarios);
        maybe(e, "test_scenarios", c.test_scenarios);
        maybe(e, "subset_exponents", c.subset_exponents);
        maybe(e, "setups", c.setups);
        maybe(e, "seeds", c.seeds);
        maybe(e, "data_seed", c.data_seed);
        maybe(e, "out_dir", c.out_dir);
    }
    c.validate();
    return c;
}

void save_run_config(const std::string& path, const RunConfig& c) {
    json j;
    j["sampling"] = sampling_to_json(c.sampling);
    j["rir"] = rir_to_json(c.rir);
    j["audio"] = json{{"duration_s", c.audio.duration_s}, {"packed", c.audio.packed}};
    j["model_preset"] = c.model_preset;
    j["model"] = model_to_json(c.model);
    j["pretrain"] = training_to_json(c.pretrain);
    j["finetune"] = training_to_json(c.finetune);
    j["experiment"] = json{{"total_scenarios", c.total_scenarios},
                           {"test_scenarios", c.test_scenarios},
                           {"subset_exponents", c.subset_exponents},
                           {"setups", c.setups},
                           {"seeds", c.seeds},
                           {"data_seed", c.data_seed},
                           {"out_dir", c.out_dir}};
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("config: cannot write " + path);
    out << j.dump(2) << '\n';
}

std::string model_config_to_json(const nn::ModelConfig& config) {
    return model_to_json(config).dump();
}

nn::ModelConfig model_config_from_json(const std::string& json_text) {
    return model_from_json(json::parse(json_text));
}

} // namespace arbiter::harness
