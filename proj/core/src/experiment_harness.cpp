#include "arbiter/experiment_harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "arbiter/checkpoint.hpp"
#include "arbiter/errors.hpp"
#include "arbiter/objectives.hpp"
#include "arbiter/wav.hpp"

namespace arbiter::harness {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<long> subset_sizes(long total, const std::vector<int>& exponents) {
    if (total < 1) throw Error("subset_sizes: total must be >= 1");
    std::vector<long> sizes;
    sizes.reserve(exponents.size());
    for (int e : exponents) {
        if (e < 0) throw Error("subset_sizes: exponent must be >= 0");
        long divisor = 1;
        for (int i = 0; i < e; ++i) divisor *= 4;
        const long s = total / divisor;
        if (s == 0) {
            throw Error("subset_sizes: subset at exponent " + std::to_string(e) + " is empty");
        }
        sizes.push_back(s);
    }
    return sizes;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> indices(n);
    for (std::size_t i = 0; i < n; ++i) indices[i] = i;
    rng::Generator gen(rng::derive_seed(seed, 0x0d9d97));
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(gen.uniform_int(0, static_cast<std::int64_t>(i) - 1));
        std::swap(indices[i - 1], indices[j]);
    }
    return indices;
}

int worker_count() {
    if (const char* env = std::getenv("ARBITER_WORKERS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

DatasetPaths dataset_paths(const std::string& out_dir) {
    const fs::path base(out_dir);
    DatasetPaths p;
    p.scenes_train = (base / "scenes_train.jsonl").string();
    p.scenes_test = (base / "scenes_test.jsonl").string();
    p.manifest_train = (base / "manifest_train.jsonl").string();
    p.manifest_test = (base / "manifest_test.jsonl").string();
    p.audio_train_dir = (base / "audio_train").string();
    p.audio_test_dir = (base / "audio_test").string();
    p.checkpoints_dir = (base / "checkpoints").string();
    p.evals_dir = (base / "evals").string();
    p.report_dir = (base / "report").string();
    return p;
}

void generate_scenes(const RunConfig& config, const std::string& out_dir) {
    config.validate();
    fs::create_directories(out_dir);
    const DatasetPaths paths = dataset_paths(out_dir);

    std::vector<scene::SceneSpec> train;
    train.reserve(static_cast<std::size_t>(config.total_scenarios));
    for (long i = 0; i < config.total_scenarios; ++i) {
        train.push_back(scene::sample_scene(
            config.sampling, rng::derive_seed(config.data_seed, static_cast<std::uint64_t>(i))));
    }
    io::write_scene_manifest(paths.scenes_train, train);

    // Disjoint seed stream for the held-out pool.
    const std::uint64_t test_seed = config.data_seed ^ 0x7e57'0000'0000'0001ull;
    std::vector<scene::SceneSpec> test;
    test.reserve(static_cast<std::size_t>(config.test_scenarios));
    for (long i = 0; i < config.test_scenarios; ++i) {
        test.push_back(scene::sample_scene(
            config.sampling, rng::derive_seed(test_seed, static_cast<std::uint64_t>(i))));
    }
    io::write_scene_manifest(paths.scenes_test, test);
}

namespace {

void render_split(const RunConfig& config, const std::string& scenes_path,
                  const std::string& audio_dir, const std::string& manifest_path,
                  const std::string& out_dir) {
    const std::vector<scene::SceneSpec> scenes = io::read_scene_manifest(scenes_path);
    fs::create_directories(audio_dir);
    const std::string audio_rel = fs::path(audio_dir).filename().string();

    std::vector<io::ScenarioRecord> records(scenes.size());
    std::atomic<std::size_t> cursor{0};
    const int workers = std::min<int>(worker_count(), std::max<int>(1, static_cast<int>(scenes.size())));

    auto work = [&]() {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= scenes.size()) return;
            const scene::SceneSpec& spec = scenes[i];
            const audio::ArbitrationScenario scenario =
                audio::render_scenario_from_seed(spec, config.audio.duration_s, config.rir);

            io::ScenarioRecord rec;
            rec.id = static_cast<std::uint64_t>(i);
            rec.scene = spec;
            rec.label = scenario.label;
            char name[64];
            if (config.audio.packed) {
                std::snprintf(name, sizeof name, "scn_%08llu.wav",
                              static_cast<unsigned long long>(i));
                wav::WavData packed;
                packed.sample_rate = config.rir.sample_rate;
                packed.channels = static_cast<int>(scenario.device_waveforms.size());
                const std::size_t frames = scenario.device_waveforms.front().samples.size();
                packed.samples.resize(frames * scenario.device_waveforms.size());
                for (std::size_t f = 0; f < frames; ++f) {
                    for (std::size_t d = 0; d < scenario.device_waveforms.size(); ++d) {
                        packed.samples[f * scenario.device_waveforms.size() + d] =
                            scenario.device_waveforms[d].samples[f];
                    }
                }
                wav::write((fs::path(audio_dir) / name).string(), packed);
                rec.packed_path = audio_rel + "/" + name;
            } else {
                for (std::size_t d = 0; d < scenario.device_waveforms.size(); ++d) {
                    std::snprintf(name, sizeof name, "scn_%08llu_d%zu.wav",
                                  static_cast<unsigned long long>(i), d);
                    wav::WavData mono;
                    mono.sample_rate = config.rir.sample_rate;
                    mono.channels = 1;
                    mono.samples = scenario.device_waveforms[d].samples;
                    wav::write((fs::path(audio_dir) / name).string(), mono);
                    rec.audio_paths.push_back(audio_rel + "/" + name);
                }
            }
            records[i] = std::move(rec);
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();

    (void)out_dir;
    io::write_dataset_manifest(manifest_path, records);
}

} // namespace

void generate_audio(const RunConfig& config, const std::string& out_dir) {
    const DatasetPaths paths = dataset_paths(out_dir);
    render_split(config, paths.scenes_train, paths.audio_train_dir, paths.manifest_train, out_dir);
    render_split(config, paths.scenes_test, paths.audio_test_dir, paths.manifest_test, out_dir);
}

void featurize_dataset(const RunConfig& config, const std::string& out_dir) {
    (void)config;
    const DatasetPaths paths = dataset_paths(out_dir);
    for (const std::string& manifest : {paths.manifest_train, paths.manifest_test}) {
        ScenarioDataset ds(manifest);
        fs::create_directories(ds.feature_cache_dir());
        std::atomic<std::size_t> cursor{0};
        const int workers = std::min<int>(worker_count(), std::max<int>(1, static_cast<int>(ds.size())));
        auto work = [&]() {
            for (;;) {
                const std::size_t i = cursor.fetch_add(1);
                if (i >= ds.size()) return;
                const auto waves = io::load_record_audio(ds.record(i), ds.directory());
                for (std::size_t d = 0; d < waves.size(); ++d) {
                    const feat::FeatureMatrix f = feat::normalize(feat::lfbe(waves[d]));
                    io::write_feature_file(ds.feature_cache_path(i, static_cast<int>(d)), f);
                }
            }
        };
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
}

namespace {

std::vector<std::size_t> front_indices(const std::vector<std::size_t>& order, long count) {
    return {order.begin(), order.begin() + count};
}

// Deterministic train/validation split of a pool of indices.
void split_train_val(const std::vector<std::size_t>& pool, double val_fraction,
                     std::uint64_t split_seed, std::vector<std::size_t>& train,
                     std::vector<std::size_t>& val) {
    const std::size_t n = pool.size();
    if (n == 1) {
        train = pool;
        val = pool;
        return;
    }
    const auto order = shuffled_indices(n, split_seed);
    auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
    n_val = std::max<std::size_t>(1, std::min(n_val, n - 1));
    val.reserve(n_val);
    train.reserve(n - n_val);
    for (std::size_t i = 0; i < n; ++i) {
        if (i < n_val) val.push_back(pool[order[i]]);
        else train.push_back(pool[order[i]]);
    }
}

// Checkpoint/eval locations are tracked relative to out_dir so reports and
// eval JSONs are byte-identical across reruns regardless of where they live.
std::string pretrain_checkpoint_rel(const std::string& setup) {
    return "checkpoints/pretrain_" + setup + ".ckpt";
}

std::string finetune_checkpoint_rel(const std::string& setup, int subset_exp, std::uint64_t seed) {
    char name[96];
    std::snprintf(name, sizeof name, "checkpoints/%s_exp%d_seed%llu.ckpt", setup.c_str(),
                  subset_exp, static_cast<unsigned long long>(seed));
    return name;
}

std::string pretrain_checkpoint_path(const DatasetPaths& paths, const std::string& setup) {
    return (fs::path(paths.checkpoints_dir).parent_path() / pretrain_checkpoint_rel(setup))
        .string();
}

std::string finetune_checkpoint_path(const DatasetPaths& paths, const std::string& setup,
                                     int subset_exp, std::uint64_t seed) {
    return (fs::path(paths.checkpoints_dir).parent_path() /
            finetune_checkpoint_rel(setup, subset_exp, seed))
        .string();
}

std::string eval_json_path(const DatasetPaths& paths, const std::string& setup, int subset_exp,
                           std::uint64_t seed) {
    char name[96];
    std::snprintf(name, sizeof name, "eval_%s_exp%d_seed%llu.json", setup.c_str(), subset_exp,
                  static_cast<unsigned long long>(seed));
    return (fs::path(paths.evals_dir) / name).string();
}

json curve_to_json(const std::vector<TrainCurvePoint>& curve) {
    json arr = json::array();
    for (const auto& p : curve) {
        arr.push_back(json{{"step", p.step},
                           {"train_loss", p.train_loss},
                           {"val_loss", p.val_loss},
                           {"val_contrastive", p.val_contrastive},
                           {"val_reconstructive", p.val_reconstructive}});
    }
    return arr;
}

} // namespace

PretrainOutcome run_pretrain(const RunConfig& config, const std::string& setup,
                             std::uint64_t seed, const std::string& out_dir) {
    if (setup == "baseline") throw Error("run_pretrain: baseline has no pretraining");
    const PretrainSetup ps = pretrain_setup_from_string(setup);
    const DatasetPaths paths = dataset_paths(out_dir);
    fs::create_directories(paths.checkpoints_dir);

    ScenarioDataset dataset(paths.manifest_train);
    std::vector<std::size_t> all(dataset.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    std::vector<std::size_t> train_idx, val_idx;
    split_train_val(all, config.pretrain.val_fraction,
                    rng::derive_seed(config.data_seed, 0x5e71u), train_idx, val_idx);

    nn::PretrainModel model(config.model, seed, ps != PretrainSetup::contrastive);
    const TrainResult result = pretrain_model(model, ps, UnlabeledView(dataset, train_idx),
                                              UnlabeledView(dataset, val_idx), config.pretrain,
                                              seed);

    io::CheckpointMeta meta;
    meta.config_json = json{{"kind", "pretrain"},
                            {"setup", setup},
                            {"model", json::parse(model_config_to_json(config.model))}}
                           .dump();
    meta.step = static_cast<std::uint64_t>(result.best_step);
    meta.val_loss = result.best_val_loss;
    const std::string path = pretrain_checkpoint_path(paths, setup);
    io::save_checkpoint(path, model.store(), meta);
    return {path, result};
}

FinetuneOutcome run_finetune(const RunConfig& config, const std::string& setup, int subset_exp,
                             std::uint64_t seed, const std::string& out_dir) {
    const DatasetPaths paths = dataset_paths(out_dir);
    fs::create_directories(paths.checkpoints_dir);
    ScenarioDataset dataset(paths.manifest_train);

    const std::vector<long> sizes = subset_sizes(static_cast<long>(dataset.size()), {subset_exp});
    const long subset_size = sizes[0];
    const auto order = shuffled_indices(dataset.size(), config.data_seed);
    const auto subset = front_indices(order, subset_size);

    std::vector<std::size_t> train_idx, val_idx;
    split_train_val(subset, config.finetune.val_fraction,
                    rng::derive_seed(config.data_seed, 0xf1000u + static_cast<std::uint64_t>(subset_exp)),
                    train_idx, val_idx);

    nn::ClassifierModel model(config.model, seed);
    if (setup != "baseline") {
        const std::string init_path = pretrain_checkpoint_path(paths, setup);
        if (!fs::exists(init_path)) {
            throw IoError("run_finetune: missing pretraining checkpoint " + init_path);
        }
        io::load_checkpoint_prefix(init_path, model.store(), "encoder.");
    }

    const TrainResult result =
        finetune_model(model, dataset, train_idx, val_idx, config.finetune, seed);

    io::CheckpointMeta meta;
    meta.config_json = json{{"kind", "finetune"},
                            {"setup", setup},
                            {"subset_exp", subset_exp},
                            {"seed", seed},
                            {"model", json::parse(model_config_to_json(config.model))}}
                           .dump();
    meta.step = static_cast<std::uint64_t>(result.best_step);
    meta.val_loss = result.best_val_loss;
    const std::string path = finetune_checkpoint_path(paths, setup, subset_exp, seed);
    io::save_checkpoint(path, model.store(), meta);
    return {path, result, subset_size};
}

double run_evaluate(const RunConfig& config, const std::string& setup, int subset_exp,
                    std::uint64_t seed, const std::string& out_dir) {
    const DatasetPaths paths = dataset_paths(out_dir);
    fs::create_directories(paths.evals_dir);
    ScenarioDataset test(paths.manifest_test);
    if (test.size() == 0) throw Error("run_evaluate: empty test set");

    const std::string ckpt_path = finetune_checkpoint_path(paths, setup, subset_exp, seed);
    const io::CheckpointMeta meta = io::read_checkpoint_meta(ckpt_path);
    const json cfg = json::parse(meta.config_json);
    const nn::ModelConfig model_config = model_config_from_json(cfg.at("model").dump());

    nn::ClassifierModel model(model_config, seed);
    io::load_checkpoint(ckpt_path, model.store());

    std::vector<std::size_t> indices(test.size());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    const double accuracy = evaluate_accuracy(model, test, indices);

    const std::vector<long> sizes =
        subset_sizes(config.total_scenarios, {subset_exp});
    json out;
    out["setup"] = setup;
    out["subset_exp"] = subset_exp;
    out["subset_size"] = sizes[0];
    out["seed"] = seed;
    out["accuracy"] = accuracy;
    out["checkpoint_path"] = finetune_checkpoint_rel(setup, subset_exp, seed);
    std::ofstream f(eval_json_path(paths, setup, subset_exp, seed), std::ios::trunc);
    if (!f) throw IoError("run_evaluate: cannot write eval json");
    f << out.dump(2) << '\n';
    return accuracy;
}

namespace {

void fill_relative_error(const RunConfig& config, Report& report) {
    const int max_exp = *std::max_element(config.subset_exponents.begin(),
                                          config.subset_exponents.end());
    // Per-seed baseline at the smallest subset; its own cell is exactly 1.
    std::unordered_map<std::uint64_t, double> base_acc;
    for (const auto& cell : report.cells) {
        if (cell.setup == "baseline" && cell.subset_exp == max_exp) {
            base_acc[cell.seed] = cell.accuracy;
        }
    }
    for (auto& cell : report.cells) {
        auto it = base_acc.find(cell.seed);
        if (it == base_acc.end()) {
            throw Error("report: missing baseline smallest-subset cell for seed " +
                        std::to_string(cell.seed));
        }
        cell.relative_error_rate = objectives::relative_error_rate(cell.accuracy, it->second);
    }
}

} // namespace

Report run_sweep(const RunConfig& config) {
    config.validate();
    const std::string out_dir = config.out_dir;
    const DatasetPaths paths = dataset_paths(out_dir);

    if (!fs::exists(paths.manifest_train) || !fs::exists(paths.manifest_test)) {
        generate_scenes(config, out_dir);
        generate_audio(config, out_dir);
    }

    Report report;
    for (const auto& setup : config.setups) {
        if (setup != "baseline") {
            run_pretrain(config, setup, config.seeds.front(), out_dir);
        }
        for (const int exp : config.subset_exponents) {
            for (const std::uint64_t seed : config.seeds) {
                const FinetuneOutcome ft = run_finetune(config, setup, exp, seed, out_dir);
                const double accuracy = run_evaluate(config, setup, exp, seed, out_dir);
                ReportCell cell;
                cell.setup = setup;
                cell.subset_size = ft.subset_size;
                cell.subset_exp = exp;
                cell.seed = seed;
                cell.accuracy = accuracy;
                cell.checkpoint_path = finetune_checkpoint_rel(setup, exp, seed);
                cell.curve = ft.result.curve;
                report.cells.push_back(std::move(cell));
            }
        }
    }

    fill_relative_error(config, report);

    fs::create_directories(paths.report_dir);
    write_report_csv((fs::path(paths.report_dir) / "report.csv").string(), report);
    write_report_svg((fs::path(paths.report_dir) / "report.svg").string(), report);
    write_report_json((fs::path(paths.report_dir) / "report.json").string(), report);
    return report;
}

Report assemble_report(const RunConfig& config, const std::string& out_dir) {
    config.validate();
    const DatasetPaths paths = dataset_paths(out_dir);

    Report report;
    for (const auto& setup : config.setups) {
        for (const int exp : config.subset_exponents) {
            for (const std::uint64_t seed : config.seeds) {
                const std::string path = eval_json_path(paths, setup, exp, seed);
                if (!fs::exists(path)) {
                    throw IoError("report: missing eval result " + path +
                                  " (run the evaluate step for this cell first)");
                }
                std::ifstream in(path);
                json j;
                in >> j;
                ReportCell cell;
                cell.setup = j.at("setup").get<std::string>();
                cell.subset_exp = j.at("subset_exp").get<int>();
                cell.subset_size = j.at("subset_size").get<long>();
                cell.seed = j.at("seed").get<std::uint64_t>();
                cell.accuracy = j.at("accuracy").get<double>();
                cell.checkpoint_path = j.at("checkpoint_path").get<std::string>();
                report.cells.push_back(std::move(cell));
            }
        }
    }
    fill_relative_error(config, report);

    fs::create_directories(paths.report_dir);
    write_report_csv((fs::path(paths.report_dir) / "report.csv").string(), report);
    write_report_svg((fs::path(paths.report_dir) / "report.svg").string(), report);
    write_report_json((fs::path(paths.report_dir) / "report.json").string(), report);
    return report;
}

} // namespace arbiter::harness
