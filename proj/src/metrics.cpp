#include "dkmo/metrics.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "dkmo/error.hpp"

namespace dkmo::metrics {

ClassificationMetrics evaluate(std::span<const int> truth, std::span<const int> predicted, int classes) {
    if (truth.size() != predicted.size()) throw ShapeError("evaluate: truth and predictions differ in length");
    ClassificationMetrics m;
    m.samples = static_cast<long>(truth.size());
    m.confusion.assign(static_cast<std::size_t>(classes), std::vector<long>(static_cast<std::size_t>(classes), 0));
    long correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0 || truth[i] >= classes || predicted[i] < 0 || predicted[i] >= classes) {
            throw InputError("evaluate: label outside [0, " + std::to_string(classes) + ")");
        }
        ++m.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
        correct += truth[i] == predicted[i];
    }
    m.accuracy = truth.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(truth.size());
    double sum = 0.0;
    int present = 0;
    for (int c = 0; c < classes; ++c) {
        long total = 0;
        for (long v : m.confusion[static_cast<std::size_t>(c)]) total += v;
        if (total == 0) {
            m.per_class.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        const double acc =
            static_cast<double>(m.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)]) / total;
        m.per_class.push_back(acc);
        sum += acc;
        ++present;
    }
    m.macro_accuracy = present ? sum / present : 0.0;
    return m;
}

void write_metrics_json(const std::filesystem::path& path, const RunInfo& info, const ClassificationMetrics& m,
                        const std::vector<std::pair<std::string, double>>& extras) {
    nlohmann::ordered_json j;
    j["model"] = info.model;
    j["config_hash"] = info.config_hash;
    j["seed"] = info.seed;
    j["samples"] = m.samples;
    j["accuracy"] = m.accuracy;
    j["macro_accuracy"] = m.macro_accuracy;
    auto per = nlohmann::ordered_json::array();
    for (double a : m.per_class) {
        if (std::isnan(a)) {
            per.push_back(nullptr);
        } else {
            per.push_back(a);
        }
    }
    j["per_class_accuracy"] = per;
    j["confusion_matrix"] = m.confusion;
    for (const auto& [key, value] : extras) j[key] = value;
    j["wall_time_seconds"] = info.wall_time_seconds;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace dkmo::metrics
