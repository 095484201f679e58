// arbiter — multi-device wakeword scene simulator, self-supervised acoustic
// pretraining, and arbitration experiment harness.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "arbiter/errors.hpp"
#include "arbiter/experiment_harness.hpp"

namespace {

using arbiter::harness::RunConfig;

struct CommonArgs {
    std::string config_path;
    std::uint64_t seed = 1;
    bool seed_given = false;
    std::string out_dir;
    std::string setup = "contrastive";
    int subset_exp = 0;
};

RunConfig resolve_config(const CommonArgs& args) {
    RunConfig config = args.config_path.empty()
                           ? arbiter::harness::default_run_config()
                           : arbiter::harness::load_run_config(args.config_path);
    if (!args.out_dir.empty()) config.out_dir = args.out_dir;
    return config;
}

void add_common(CLI::App* cmd, CommonArgs& args, bool with_setup, bool with_subset) {
    cmd->add_option("--config", args.config_path, "Run configuration JSON");
    cmd->add_option("--seed", args.seed, "Seed for this step")
        ->each([&args](const std::string&) { args.seed_given = true; });
    cmd->add_option("--out", args.out_dir, "Output directory (overrides config)");
    if (with_setup) {
        cmd->add_option("--setup", args.setup,
                        "Experiment setup: baseline | contrastive | reconstructive | combo");
    }
    if (with_subset) {
        cmd->add_option("--subset-exp", args.subset_exp, "Subset exponent i in s_i = floor(S/4^i)");
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-device arbitration scene simulator and pretraining harness"};
    app.require_subcommand(1);

    CommonArgs args;

    CLI::App* gen_scenes = app.add_subcommand("gen-scenes", "Sample train/test scene manifests");
    add_common(gen_scenes, args, false, false);

    CLI::App* gen_audio = app.add_subcommand("gen-audio", "Render per-device audio for sampled scenes");
    add_common(gen_audio, args, false, false);

    CLI::App* featurize = app.add_subcommand("featurize", "Write the LFBE feature cache");
    add_common(featurize, args, false, false);

    CLI::App* pretrain = app.add_subcommand("pretrain", "Self-supervised pretraining on unlabeled scenarios");
    add_common(pretrain, args, true, false);

    CLI::App* finetune = app.add_subcommand("finetune", "End-to-end finetuning on a training subset");
    add_common(finetune, args, true, true);

    CLI::App* evaluate = app.add_subcommand("evaluate", "Evaluate a finetuned checkpoint on the test set");
    add_common(evaluate, args, true, true);

    CLI::App* report = app.add_subcommand("report", "Assemble the sweep report (CSV + SVG + JSON)");
    add_common(report, args, false, false);

    CLI11_PARSE(app, argc, argv);

    try {
        const RunConfig config = resolve_config(args);
        const std::string out = config.out_dir;

        if (gen_scenes->parsed()) {
            RunConfig c = config;
            if (args.seed_given) c.data_seed = args.seed;
            arbiter::harness::generate_scenes(c, out);
            std::printf("wrote %s and %s\n",
                        arbiter::harness::dataset_paths(out).scenes_train.c_str(),
                        arbiter::harness::dataset_paths(out).scenes_test.c_str());
        } else if (gen_audio->parsed()) {
            arbiter::harness::generate_audio(config, out);
            std::printf("wrote %s and %s\n",
                        arbiter::harness::dataset_paths(out).manifest_train.c_str(),
                        arbiter::harness::dataset_paths(out).manifest_test.c_str());
        } else if (featurize->parsed()) {
            arbiter::harness::featurize_dataset(config, out);
            std::printf("feature cache written under %s\n", out.c_str());
        } else if (pretrain->parsed()) {
            const std::uint64_t seed = args.seed_given ? args.seed : config.seeds.front();
            const auto outcome = arbiter::harness::run_pretrain(config, args.setup, seed, out);
            std::printf("pretrained %s: best step %ld, val loss %.6f -> %s\n", args.setup.c_str(),
                        outcome.result.best_step, outcome.result.best_val_loss,
                        outcome.checkpoint_path.c_str());
        } else if (finetune->parsed()) {
            const std::uint64_t seed = args.seed_given ? args.seed : config.seeds.front();
            const auto outcome =
                arbiter::harness::run_finetune(config, args.setup, args.subset_exp, seed, out);
            std::printf("finetuned %s exp=%d seed=%llu on %ld scenarios: best step %ld -> %s\n",
                        args.setup.c_str(), args.subset_exp,
                        static_cast<unsigned long long>(seed), outcome.subset_size,
                        outcome.result.best_step, outcome.checkpoint_path.c_str());
        } else if (evaluate->parsed()) {
            const std::uint64_t seed = args.seed_given ? args.seed : config.seeds.front();
            const double acc =
                arbiter::harness::run_evaluate(config, args.setup, args.subset_exp, seed, out);
            std::printf("accuracy %s exp=%d seed=%llu: %.6f\n", args.setup.c_str(),
                        args.subset_exp, static_cast<unsigned long long>(seed), acc);
        } else if (report->parsed()) {
            const auto rep = arbiter::harness::assemble_report(config, out);
            std::printf("report with %zu cells written under %s/report\n", rep.cells.size(),
                        out.c_str());
        }
    } catch (const std::exception& e) {
        // Machine-readable error line on stderr, nonzero exit.
        std::cerr << "{\"error\": \"" << e.what() << "\"}\n";
        return 1;
    }
    return 0;
}
