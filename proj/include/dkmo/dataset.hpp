#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dkmo/linalg.hpp"

namespace dkmo::data {

using linalg::Matrix;
using Index = Eigen::Index;

enum class TableKind { kernel, distance };
std::string to_string(TableKind kind);
TableKind table_kind_from_string(const std::string& s);

struct FeatureView {
    std::string name;
    Matrix values;  // n x d
};

// Precomputed n x n kernel or distance table. The kind is declared, never
// inferred.
struct Table {
    std::string name;
    TableKind kind = TableKind::kernel;
    Matrix values;
};

struct Split {
    std::vector<Index> train;
    std::vector<Index> test;
};

struct Dataset {
    std::vector<FeatureView> views;
    std::vector<Table> tables;
    std::vector<int> labels;
    Split split;
    std::vector<std::string> class_names;

    Index size() const { return static_cast<Index>(labels.size()); }
    int classes() const;
    const FeatureView* view(const std::string& name) const;
    const Table* table(const std::string& name) const;
    std::vector<int> labels_at(const std::vector<Index>& rows) const;
    // Throws IngestError on any broken invariant (sizes, symmetry, split).
    void validate() const;
};

struct FileSpec {
    std::string name;
    std::filesystem::path path;
    std::optional<TableKind> kind;  // tables only
};

struct DatasetFiles {
    std::filesystem::path labels;
    std::vector<FileSpec> features;
    std::vector<FileSpec> tables;
};

// Loads and validates every file. Errors name the offending file; the split
// is left empty.
Dataset load_dataset(const DatasetFiles& files);

struct SplitSpec {
    std::optional<double> fraction;   // train share
    std::optional<Index> per_class;   // train samples per class
    bool stratify = true;
};

// Disjoint covering train/test split, both halves sorted. Throws InputError
// when a per-class request exceeds a class size.
Split make_split(std::span<const int> labels, const SplitSpec& spec, std::uint64_t seed);
// Unstratified fraction split over n samples.
Split make_split(Index n, double fraction, std::uint64_t seed);

}  // namespace dkmo::data
