#include "dkmo/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "dkmo/error.hpp"
#include "dkmo/kernels.hpp"
#include "dkmo/matrix_io.hpp"
#include "dkmo/random.hpp"

namespace dkmo::data {

std::string to_string(TableKind kind) { return kind == TableKind::kernel ? "kernel" : "distance"; }

TableKind table_kind_from_string(const std::string& s) {
    if (s == "kernel") return TableKind::kernel;
    if (s == "distance") return TableKind::distance;
    throw ConfigError("unknown table type '" + s + "' (expected kernel or distance)");
}

int Dataset::classes() const {
    return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

const FeatureView* Dataset::view(const std::string& name) const {
    for (const auto& v : views)
        if (v.name == name) return &v;
    return nullptr;
}

const Table* Dataset::table(const std::string& name) const {
    for (const auto& t : tables)
        if (t.name == name) return &t;
    return nullptr;
}

std::vector<int> Dataset::labels_at(const std::vector<Index>& rows) const {
    std::vector<int> out;
    out.reserve(rows.size());
    for (Index r : rows) out.push_back(labels.at(static_cast<std::size_t>(r)));
    return out;
}

void Dataset::validate() const {
    const Index n = size();
    if (n == 0) throw IngestError("dataset has no labels");
    if (views.empty() && tables.empty()) throw IngestError("dataset has neither features nor tables");
    for (int y : labels)
        if (y < 0) throw IngestError("negative label " + std::to_string(y));
    for (const auto& v : views) {
        if (v.values.rows() != n) {
            throw IngestError("features '" + v.name + "' have " + std::to_string(v.values.rows()) +
                              " rows but there are " + std::to_string(n) + " labels");
        }
        if (!linalg::all_finite(v.values)) throw IngestError("features '" + v.name + "' contain non-finite values");
    }
    for (const auto& t : tables) {
        if (t.values.rows() != n || t.values.cols() != n) {
            throw IngestError(to_string(t.kind) + " '" + t.name + "' is " + std::to_string(t.values.rows()) + "x" +
                              std::to_string(t.values.cols()) + " but there are " + std::to_string(n) + " labels");
        }
        try {
            if (t.kind == TableKind::kernel) {
                kernels::KernelMatrix k(t.values, t.name);
            } else {
                kernels::DistanceMatrix d(t.values, t.name);
            }
        } catch (const Error& e) {
            throw IngestError(to_string(t.kind) + " '" + t.name + "': " + e.what());
        }
    }
    if (!split.train.empty() || !split.test.empty()) {
        std::vector<int> seen(static_cast<std::size_t>(n), 0);
        for (const auto* part : {&split.train, &split.test}) {
            for (Index i : *part) {
                if (i < 0 || i >= n) throw IngestError("split index " + std::to_string(i) + " out of range");
                ++seen[static_cast<std::size_t>(i)];
            }
        }
        for (int c : seen)
            if (c != 1) throw IngestError("split is not a disjoint cover of the samples");
    }
}

Dataset load_dataset(const DatasetFiles& files) {
    Dataset ds;
    ds.labels = io::read_labels(files.labels);
    for (const auto& f : files.features) ds.views.push_back({f.name, io::read_matrix(f.path)});
    for (const auto& f : files.tables) {
        if (!f.kind) throw ConfigError("table '" + f.name + "' must declare kernel or distance");
        ds.tables.push_back({f.name, *f.kind, io::read_matrix(f.path)});
    }
    try {
        ds.validate();
    } catch (const IngestError& e) {
        // Name the file behind the failing entry when possible.
        std::string msg = e.what();
        for (const auto& f : files.features)
            if (msg.find("'" + f.name + "'") != std::string::npos) throw IngestError(f.path.string() + ": " + msg);
        for (const auto& f : files.tables)
            if (msg.find("'" + f.name + "'") != std::string::npos) throw IngestError(f.path.string() + ": " + msg);
        throw IngestError(files.labels.string() + ": " + msg);
    }
    return ds;
}

namespace {

Split finish(std::vector<Index> train, Index n) {
    std::sort(train.begin(), train.end());
    Split s;
    std::vector<char> in(static_cast<std::size_t>(n), 0);
    for (Index i : train) in[static_cast<std::size_t>(i)] = 1;
    for (Index i = 0; i < n; ++i)
        if (!in[static_cast<std::size_t>(i)]) s.test.push_back(i);
    s.train = std::move(train);
    return s;
}

Index rounded_share(double fraction, Index n) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw InputError("split fraction must lie in (0, 1)");
    return static_cast<Index>(std::llround(fraction * static_cast<double>(n)));
}

}  // namespace

Split make_split(Index n, double fraction, std::uint64_t seed) {
    const Index take = rounded_share(fraction, n);
    Rng rng(derive_seed(seed, "split"));
    std::vector<Index> train;
    for (std::size_t i : rng.sample_without_replacement(static_cast<std::size_t>(n), static_cast<std::size_t>(take)))
        train.push_back(static_cast<Index>(i));
    return finish(std::move(train), n);
}

Split make_split(std::span<const int> labels, const SplitSpec& spec, std::uint64_t seed) {
    const Index n = static_cast<Index>(labels.size());
    if (spec.fraction.has_value() == spec.per_class.has_value()) {
        throw InputError("split needs exactly one of fraction or per-class count");
    }
    if (spec.per_class && *spec.per_class <= 0) throw InputError("per-class count must be positive");
    if (!spec.stratify) {
        if (spec.per_class) throw InputError("per-class splits are always stratified");
        return make_split(n, *spec.fraction, seed);
    }
    std::map<int, std::vector<Index>> by_class;
    for (Index i = 0; i < n; ++i) by_class[labels[static_cast<std::size_t>(i)]].push_back(i);
    std::vector<Index> train;
    for (auto& [label, members] : by_class) {
        const Index size = static_cast<Index>(members.size());
        Index take;
        if (spec.per_class) {
            take = *spec.per_class;
            if (take > size) {
                throw InputError("class " + std::to_string(label) + " has " + std::to_string(size) +
                                 " samples, cannot take " + std::to_string(take));
            }
        } else {
            take = rounded_share(*spec.fraction, size);
        }
        Rng rng(derive_seed(derive_seed(seed, "split"), static_cast<std::uint64_t>(label)));
        for (std::size_t j :
             rng.sample_without_replacement(static_cast<std::size_t>(size), static_cast<std::size_t>(take)))
            train.push_back(members[j]);
    }
    return finish(std::move(train), n);
}

}  // namespace dkmo::data
