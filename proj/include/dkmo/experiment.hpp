#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dkmo/bundle.hpp"
#include "dkmo/config.hpp"
#include "dkmo/dataset.hpp"
#include "dkmo/metrics.hpp"

// End-to-end pipelines behind the command-line tool. Every kernel is
// normalised to unit diagonal before use.
namespace dkmo::experiment {

namespace fs = std::filesystem;
using linalg::Matrix;
using Index = Eigen::Index;

struct Context {
    int threads = 1;
    bool quiet = false;
};

struct Prepared {
    data::Dataset dataset;
    std::vector<int> train_labels;
    std::vector<int> test_labels;
    int classes = 0;
};

// Loads or synthesises the data and draws the configured split.
Prepared prepare_data(const config::ExperimentConfig& cfg);

// A configured kernel bound to a prepared dataset. The training source only
// sees training samples; input() produces out-of-sample inputs for any rows.
struct BoundKernel {
    model::KernelSource source;
    std::optional<Matrix> features;     // all samples (feature kernels)
    std::optional<Matrix> full_kernel;  // all samples (table kernels), normalised
    std::vector<Index> train;
    double gamma = 0.0;

    model::SampleInput input(std::span<const Index> rows, bool kernel_rows) const;
    // Normalised kernel over all samples.
    Matrix all_pairs() const;
};
BoundKernel bind_kernel(const Prepared& data, const config::KernelSpec& spec);

bool needs_kernel_rows(const nystroem::EmbeddingEnsemble& ensemble);

struct Outcome {
    metrics::ClassificationMetrics metrics;
    std::vector<std::pair<std::string, double>> extras;
    double seconds = 0.0;
};

// Schema and data checks. Returns one line per finding; throws on errors.
std::vector<std::string> validate(const config::ExperimentConfig& cfg);
void embed(const config::ExperimentConfig& cfg, const fs::path& out, const Context& ctx);
Outcome train(const config::ExperimentConfig& cfg, const fs::path& out, const Context& ctx);
Outcome pretrain(const config::ExperimentConfig& cfg, const fs::path& out, const Context& ctx);
Outcome fuse_train(const config::ExperimentConfig& cfg, const fs::path& pretrained, const fs::path& out,
                   const Context& ctx);
// method: "decomp" (single kernel) or "uniform" (average of all kernels).
Outcome baseline(const config::ExperimentConfig& cfg, const std::string& method, const fs::path& out,
                 const Context& ctx);

struct Prediction {
    Matrix probabilities;
    std::vector<std::string> class_labels;
};
// One input file per kernel: raw features for clustered embeddings, kernel
// rows against the training samples for conventional ones.
Prediction predict(const fs::path& model_dir, const std::vector<fs::path>& inputs);
void write_predictions(const fs::path& path, const Prediction& p);

// Re-derives the test split from the bundled config and scores the model.
Outcome evaluate(const fs::path& model_dir, const fs::path& out, const Context& ctx);

}  // namespace dkmo::experiment
