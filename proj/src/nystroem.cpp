#include "dkmo/nystroem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dkmo/error.hpp"
#include "dkmo/random.hpp"

namespace dkmo::nystroem {

Matrix DenseEmbedding::embed_kernel_rows(const Matrix& kernel_rows) const {
    const auto* conv = std::get_if<ConventionalSource>(&source);
    if (!conv) throw BindingError("embedding of '" + kernel_name + "' needs features, not kernel rows");
    if (kernel_rows.cols() != rows()) {
        throw BindingError("kernel rows for '" + kernel_name + "' have " + std::to_string(kernel_rows.cols()) +
                           " columns, expected one per training sample (" + std::to_string(rows()) + ")");
    }
    return linalg::select_cols(kernel_rows, conv->columns) * map;
}

Matrix DenseEmbedding::embed_features(const Matrix& features) const {
    const auto* clus = std::get_if<ClusteredSource>(&source);
    if (!clus) throw BindingError("embedding of '" + kernel_name + "' needs kernel rows, not features");
    if (features.cols() != clus->landmarks.cols()) {
        throw BindingError("features for '" + kernel_name + "' have width " + std::to_string(features.cols()) +
                           ", expected " + std::to_string(clus->landmarks.cols()));
    }
    return kernels::cross_gram(features, clus->landmarks, clus->kernel) * map;
}

std::string DenseEmbedding::describe() const {
    std::ostringstream os;
    if (const auto* c = std::get_if<ConventionalSource>(&source)) {
        os << "conventional s=" << c->columns.size() << " r=" << c->rank << " effective_rank=" << c->effective_rank;
    } else {
        const auto& z = std::get<ClusteredSource>(source);
        os << "clustered method=" << clustering::to_string(z.method) << " r=" << z.landmarks.rows()
           << " kernel=" << kernels::to_string(z.kernel.kind) << " gamma=" << z.kernel.gamma;
    }
    return os.str();
}

std::vector<Index> EmbeddingEnsemble::widths() const {
    std::vector<Index> w;
    for (const auto& m : members) w.push_back(m.width());
    return w;
}

std::vector<Matrix> EmbeddingEnsemble::gather(std::span<const Index> rows) const {
    std::vector<Matrix> out;
    out.reserve(members.size());
    for (const auto& m : members) out.push_back(linalg::select_rows(m.values, rows));
    return out;
}

void EmbeddingEnsemble::check() const {
    if (members.empty()) throw ShapeError("embedding ensemble is empty");
    for (const auto& m : members) {
        if (m.rows() != samples()) throw ShapeError("embedding ensemble members disagree on sample count");
    }
}

DenseEmbedding conventional_single(const kernels::KernelMatrix& k, std::span<const Index> cols, Index r) {
    const Index n = k.size();
    const Index s = static_cast<Index>(cols.size());
    if (s < 1) throw InputError("conventional_single: empty column subset");
    if (r < 1 || r > s) {
        throw RankError("conventional_single: rank " + std::to_string(r) + " outside [1, " + std::to_string(s) + "]");
    }
    std::vector<Index> sorted(cols.begin(), cols.end());
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() < 0 || sorted.back() >= n) throw InputError("conventional_single: column index out of range");
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw InputError("conventional_single: duplicate column index");
    }

    const std::vector<Index> all = [&] {
        std::vector<Index> v(static_cast<std::size_t>(n));
        std::iota(v.begin(), v.end(), Index{0});
        return v;
    }();
    const Matrix e = linalg::select(k.values(), all, cols);
    const Matrix w = linalg::select(k.values(), cols, cols);
    const auto eig = linalg::sym_eig(w);
    const double floor = 1e-10 * std::max(eig.values(0), 0.0);

    ConventionalSource src;
    src.columns.assign(cols.begin(), cols.end());
    src.rank = r;
    Matrix map = Matrix::Zero(s, r);
    for (Index i = 0; i < r; ++i) {
        const double lambda = eig.values(i);
        if (lambda > floor && lambda > 0.0) {
            map.col(i) = eig.vectors.col(i) / std::sqrt(lambda);
            ++src.effective_rank;
        }
    }

    DenseEmbedding out;
    out.values = e * map;
    out.map = std::move(map);
    out.source = std::move(src);
    out.kernel_name = k.name();
    return out;
}

EmbeddingEnsemble conventional_ensemble(const kernels::KernelMatrix& k, Index members, Index s, Index r,
                                        std::uint64_t seed) {
    if (members < 1 || s < 1) throw InputError("conventional_ensemble: need at least one member of size >= 1");
    if (s * members > k.size()) {
        throw InputError("conventional_ensemble: s*P = " + std::to_string(s * members) + " exceeds n = " +
                         std::to_string(k.size()));
    }
    if (r > s) throw RankError("conventional_ensemble: rank exceeds subset size");
    Rng rng(seed);
    const auto draw = rng.sample_without_replacement(static_cast<std::size_t>(k.size()),
                                                     static_cast<std::size_t>(s * members));
    EmbeddingEnsemble out;
    for (Index p = 0; p < members; ++p) {
        std::vector<Index> group(draw.begin() + p * s, draw.begin() + (p + 1) * s);
        out.members.push_back(conventional_single(k, group, r));
    }
    return out;
}

Schedule default_schedule(Index n) {
    Schedule schedule;
    for (int divisor : {16, 12, 8, 6, 4, 3}) {
        const Index s = std::min<Index>(n, (n + divisor - 1) / divisor);
        schedule.emplace_back(std::max<Index>(s, 1), std::min<Index>(std::max<Index>(s, 1), 128));
    }
    return schedule;
}

EmbeddingEnsemble varied_ensemble(const kernels::KernelMatrix& k, const Schedule& schedule, std::uint64_t seed) {
    if (schedule.empty()) throw ConfigError("varied_ensemble: empty schedule");
    const Index n = k.size();
    Index total = 0;
    for (const auto& [s, r] : schedule) {
        if (s < 1 || s > n || r < 1 || r > s) {
            throw ConfigError("varied_ensemble: invalid (s, r) = (" + std::to_string(s) + ", " + std::to_string(r) +
                              ") for n = " + std::to_string(n));
        }
        total += s;
    }
    Rng rng(seed);
    EmbeddingEnsemble out;
    if (total <= n) {
        const auto draw = rng.sample_without_replacement(static_cast<std::size_t>(n), static_cast<std::size_t>(total));
        std::size_t offset = 0;
        for (const auto& [s, r] : schedule) {
            std::vector<Index> group(draw.begin() + static_cast<std::ptrdiff_t>(offset),
                                     draw.begin() + static_cast<std::ptrdiff_t>(offset + static_cast<std::size_t>(s)));
            offset += static_cast<std::size_t>(s);
            out.members.push_back(conventional_single(k, group, r));
        }
    } else {
        for (const auto& [s, r] : schedule) {
            const auto draw = rng.sample_without_replacement(static_cast<std::size_t>(n), static_cast<std::size_t>(s));
            std::vector<Index> group(draw.begin(), draw.end());
            out.members.push_back(conventional_single(k, group, r));
        }
    }
    return out;
}

DenseEmbedding clustered_embed(const Matrix& x, const clustering::LandmarkSet& z, const kernels::KernelFunction& kfn,
                               std::string kernel_name) {
    if (z.points.cols() != x.cols()) {
        throw ShapeError("clustered_embed: landmark width " + std::to_string(z.points.cols()) +
                         " differs from feature width " + std::to_string(x.cols()));
    }
    if (z.points.rows() < 1) throw InputError("clustered_embed: no landmarks");
    Matrix w = kernels::cross_gram(z.points, z.points, kfn);
    w = 0.5 * (w + w.transpose());
    Matrix map;
    try {
        map = linalg::inverse_sqrt_psd(w);
    } catch (const NotPsdError& e) {
        throw InputError(std::string("clustered_embed: kernel function gives an indefinite landmark Gram matrix: ") +
                         e.what());
    }
    DenseEmbedding out;
    out.values = kernels::cross_gram(x, z.points, kfn) * map;
    out.map = std::move(map);
    out.source = ClusteredSource{z.method, z.seed, z.points, kfn};
    out.kernel_name = std::move(kernel_name);
    return out;
}

EmbeddingEnsemble clustered_ensemble(const Matrix& x, Index r, const kernels::KernelFunction& kfn, std::uint64_t seed,
                                     const clustering::ClusteringOptions& options, std::string kernel_name,
                                     int threads) {
    const auto sets = clustering::landmark_ensemble(x, r, seed, options, threads);
    EmbeddingEnsemble out;
    for (const auto& z : sets) out.members.push_back(clustered_embed(x, z, kfn, kernel_name));
    return out;
}

}  // namespace dkmo::nystroem
