#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dkmo/dataset.hpp"
#include "dkmo/dkmo_model.hpp"
#include "dkmo/mdkmo.hpp"
#include "dkmo/synthetic.hpp"

// Experiment configuration: one JSON document, validated before any
// computation. Unknown keys are rejected. Relative paths resolve against the
// directory of the config file.
namespace dkmo::config {

using Index = Eigen::Index;

struct SyntheticSpec {
    std::string kind = "blobs";  // blobs | rings | multiview
    data::BlobsParams blobs;
    data::RingsParams rings;
    data::MultiviewParams multiview;
    std::optional<std::uint64_t> seed;  // defaults to the experiment seed
};

struct DataSpec {
    std::optional<data::DatasetFiles> files;
    std::optional<SyntheticSpec> synthetic;
    data::SplitSpec split;
    std::vector<std::string> class_names;
};

enum class KernelType { rbf, exp_chi2, linear, precomputed, exp_distance };
std::string to_string(KernelType t);
KernelType kernel_type_from_string(const std::string& s);

struct KernelSpec {
    std::string name;
    std::string source;           // feature view or table name
    KernelType type = KernelType::rbf;
    std::optional<double> gamma;  // empty: estimated on the training split
};

struct BaselineSpec {
    Index rank = 512;
    nn::TrainConfig train;
};

struct ExperimentConfig {
    DataSpec data;
    std::vector<KernelSpec> kernels;
    std::optional<std::string> train_kernel;  // single-kernel runs; default first
    model::EmbeddingPlan embedding;
    model::DkmoConfig dkmo;
    model::GlobalFusionConfig global_fusion;
    nn::TrainConfig finetune;
    BaselineSpec baseline;
    std::uint64_t seed = 0;
    int threads = 1;
    std::optional<std::filesystem::path> output;

    const KernelSpec& kernel(const std::string& name) const;
    const KernelSpec& single_kernel() const;
};

// Throws ConfigError naming the offending key.
ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

// Canonical JSON (every field, absolute paths), stable across runs.
std::string dump_config(const ExperimentConfig& config);
// FNV-1a of the canonical dump (threads and output excluded), 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

}  // namespace dkmo::config
