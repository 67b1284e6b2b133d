#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sckd/config.hpp"
#include "sckd/experiment.hpp"
#include "sckd/selfcheck.hpp"

// Exit contract: 0 success, 1 bad input (config, flags, input files),
// 2 failure while running (numeric blow-up, unwritable output, failed check).
namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

std::string opt_fmt(const std::optional<double>& v) {
    if (!v) return "-";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", *v);
    return buf;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides) {
    sckd::ExperimentConfig cfg;
    try {
        cfg = sckd::load_experiment_config(config_path, overrides);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitConfig;
    }
    try {
        const sckd::ExperimentResult result = sckd::run_experiment(cfg);
        for (const auto& run : result.runs) {
            if (run.failed) {
                std::printf("seed %llu: failed (%s)\n",
                            static_cast<unsigned long long>(run.seed), run.error.c_str());
                continue;
            }
            std::printf("seed %llu: known %s  novel %s  all %s\n",
                        static_cast<unsigned long long>(run.seed),
                        opt_fmt(run.task_aware.known_acc).c_str(),
                        opt_fmt(run.task_aware.novel_cluster_acc).c_str(),
                        opt_fmt(run.task_agnostic.all_acc).c_str());
        }
        std::printf("bundle: %s\n", result.bundle_dir.c_str());
        return result.any_failed() ? kExitRuntime : kExitOk;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitRuntime;
    }
}

int cmd_sweep(const std::string& config_path, const std::vector<std::string>& overrides) {
    sckd::SweepSpec spec;
    try {
        spec = sckd::load_sweep_spec(config_path, overrides);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitConfig;
    }
    try {
        const sckd::SweepResult result = sckd::run_sweep(spec);
        std::printf("sweep: %zu rows -> %s/sweep.csv\n", result.rows.size(),
                    result.bundle_dir.c_str());
        return kExitOk;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitRuntime;
    }
}

int cmd_embed(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& checkpoint_path, const std::string& output_path,
              std::uint64_t seed) {
    sckd::ExperimentConfig cfg;
    sckd::LoadedCheckpoint ckpt;
    sckd::TrainTestSplit split;
    try {
        cfg = sckd::load_experiment_config(config_path, overrides);
        ckpt = sckd::load_checkpoint(checkpoint_path);
        split = sckd::build_dataset(cfg, seed);
        if (ckpt.model.config.input_dim != split.test.feature_dim() ||
            ckpt.model.config.num_known != split.test.num_known() ||
            ckpt.model.config.num_novel != split.test.num_novel()) {
            throw sckd::ConfigError("checkpoint dimensions do not match the dataset");
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitConfig;
    }
    try {
        sckd::emit_embeddings(ckpt.model, split.test, output_path);
        std::printf("embeddings: %zu rows -> %s\n",
                    split.test.labeled_size() + split.test.unlabeled_size(),
                    output_path.c_str());
        return kExitOk;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitRuntime;
    }
}

int cmd_check(int only) {
    std::vector<sckd::CheckResult> results;
    if (only > 0) {
        results.push_back(sckd::run_check(only));
    } else {
        results = sckd::run_all_checks();
    }
    bool all_ok = true;
    for (const auto& r : results) {
        std::printf("[%d] %s %-40s %7.2fs  %s\n", r.id, r.passed ? "PASS" : "FAIL",
                    r.name.c_str(), r.seconds, r.detail.c_str());
        all_ok = all_ok && r.passed;
    }
    return all_ok ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-cooperation distillation for novel class discovery"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::string checkpoint_path;
    std::string output_path = "embeddings.csv";
    std::uint64_t embed_seed = 1;
    int only_check = 0;

    auto add_config_opts = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment config (JSON)")->required();
        sub->add_option("--set", overrides,
                        "dotted-path override, e.g. train.sckd.beta=0 (repeatable)");
    };

    CLI::App* train = app.add_subcommand("train", "run one experiment over its seed list");
    add_config_opts(train);

    CLI::App* sweep = app.add_subcommand("sweep", "class-count sweep with a beta=0 baseline");
    add_config_opts(sweep);

    CLI::App* embed =
        app.add_subcommand("embed", "dump test-set features from a trained checkpoint");
    add_config_opts(embed);
    embed->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
    embed->add_option("--output", output_path, "destination CSV");
    embed->add_option("--seed", embed_seed, "seed used when the checkpoint was trained");

    CLI::App* check = app.add_subcommand("check", "run the acceptance checks");
    check->add_option("--only", only_check, "run a single check")->check(CLI::Range(1, 9));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    if (*train) return cmd_train(config_path, overrides);
    if (*sweep) return cmd_sweep(config_path, overrides);
    if (*embed) return cmd_embed(config_path, overrides, checkpoint_path, output_path,
                                 embed_seed);
    return cmd_check(only_check);
}
