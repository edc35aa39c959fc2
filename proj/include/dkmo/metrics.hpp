#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dkmo::metrics {

struct ClassificationMetrics {
    double accuracy = 0.0;        // micro: fraction of correct predictions
    double macro_accuracy = 0.0;  // mean of per-class accuracies over present classes
    std::vector<double> per_class;             // NaN for classes absent from truth
    std::vector<std::vector<long>> confusion;  // [truth][prediction]
    long samples = 0;
};

ClassificationMetrics evaluate(std::span<const int> truth, std::span<const int> predicted, int classes);

struct RunInfo {
    std::string model;  // dkmo | mdkmo | decomp | uniform | pretrain
    std::string config_hash;
    std::uint64_t seed = 0;
    double wall_time_seconds = 0.0;
};

// metrics.json: run info plus the test metrics and optional named extras
// (e.g. per-kernel accuracies). Key order and number formatting are fixed.
void write_metrics_json(const std::filesystem::path& path, const RunInfo& info, const ClassificationMetrics& m,
                        const std::vector<std::pair<std::string, double>>& extras = {});

}  // namespace dkmo::metrics
