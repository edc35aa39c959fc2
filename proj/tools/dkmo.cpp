#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dkmo/config.hpp"
#include "dkmo/error.hpp"
#include "dkmo/experiment.hpp"

namespace fs = std::filesystem;
using namespace dkmo;

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    bool quiet = false;
};

config::ExperimentConfig load(const std::string& path, const Globals& g) {
    auto cfg = config::load_config(path);
    if (g.seed) cfg.seed = *g.seed;
    if (g.threads) cfg.threads = *g.threads;
    return cfg;
}

experiment::Context context(const config::ExperimentConfig& cfg, const Globals& g) {
    return {g.threads.value_or(cfg.threads), g.quiet};
}

fs::path out_dir(const std::string& flag, const config::ExperimentConfig& cfg) {
    if (!flag.empty()) return flag;
    if (cfg.output) return *cfg.output;
    throw ConfigError("no output directory: pass --out or set \"output\" in the config");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deep kernel machine optimization: single- and multiple-kernel classifiers"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "Override the config seed");
    app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
    app.add_flag("--quiet", g.quiet, "Suppress progress messages");

    std::string config_path, out, pretrained, method, model_dir;
    std::vector<std::string> inputs;

    auto* validate = app.add_subcommand("validate", "Check the config and data");
    validate->add_option("--config", config_path, "Experiment config (JSON)")->required();

    auto* embed = app.add_subcommand("embed", "Build and store embedding ensembles");
    embed->add_option("--config", config_path, "Experiment config (JSON)")->required();
    embed->add_option("--out", out, "Output directory");

    auto* train = app.add_subcommand("train", "Train a single-kernel model");
    train->add_option("--config", config_path, "Experiment config (JSON)")->required();
    train->add_option("--out", out, "Output directory");

    auto* pretrain = app.add_subcommand("pretrain", "Train one model per kernel");
    pretrain->add_option("--config", config_path, "Experiment config (JSON)")->required();
    pretrain->add_option("--out", out, "Output directory");

    auto* fuse = app.add_subcommand("fuse-train", "Fuse pretrained kernels and fine-tune");
    fuse->add_option("--config", config_path, "Experiment config (JSON)")->required();
    fuse->add_option("--pretrained", pretrained, "Output of pretrain")->required();
    fuse->add_option("--out", out, "Output directory");

    auto* base = app.add_subcommand("baseline", "Truncated-SVD features with a softmax classifier");
    base->add_option("--config", config_path, "Experiment config (JSON)")->required();
    base->add_option("--method", method, "decomp or uniform")->required()->check(CLI::IsMember({"decomp", "uniform"}));
    base->add_option("--out", out, "Output directory");

    auto* predict = app.add_subcommand("predict", "Class probabilities for new samples");
    predict->add_option("--model", model_dir, "Model bundle")->required();
    predict->add_option("--input", inputs, "One matrix file per kernel")->required();
    predict->add_option("--out", out, "Predictions CSV")->required();

    auto* eval = app.add_subcommand("eval", "Score a model bundle on its test split");
    eval->add_option("--model", model_dir, "Model bundle")->required();
    eval->add_option("--out", out, "metrics.json path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*validate) {
            for (const auto& line : experiment::validate(load(config_path, g))) std::cout << line << '\n';
            std::cout << "ok\n";
        } else if (*embed) {
            const auto cfg = load(config_path, g);
            experiment::embed(cfg, out_dir(out, cfg), context(cfg, g));
        } else if (*train) {
            const auto cfg = load(config_path, g);
            experiment::train(cfg, out_dir(out, cfg), context(cfg, g));
        } else if (*pretrain) {
            const auto cfg = load(config_path, g);
            experiment::pretrain(cfg, out_dir(out, cfg), context(cfg, g));
        } else if (*fuse) {
            const auto cfg = load(config_path, g);
            experiment::fuse_train(cfg, pretrained, out_dir(out, cfg), context(cfg, g));
        } else if (*base) {
            const auto cfg = load(config_path, g);
            experiment::baseline(cfg, method, out_dir(out, cfg), context(cfg, g));
        } else if (*predict) {
            std::vector<fs::path> paths(inputs.begin(), inputs.end());
            experiment::write_predictions(out, experiment::predict(model_dir, paths));
        } else if (*eval) {
            experiment::evaluate(model_dir, out, {g.threads.value_or(1), g.quiet});
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
