#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "dkmo/clustering.hpp"
#include "dkmo/kernels.hpp"
#include "dkmo/linalg.hpp"

// Dense embeddings L with K ~= L L^T, built either from sampled kernel
// columns (conventional) or from landmark points in feature space
// (clustered).
namespace dkmo::nystroem {

using linalg::Matrix;
using Index = Eigen::Index;

struct ConventionalSource {
    std::vector<Index> columns;  // indices into the training samples
    Index rank = 0;              // requested r
    Index effective_rank = 0;    // eigenvalues of W above the floor
};

struct ClusteredSource {
    clustering::ClusterMethod method = clustering::ClusterMethod::kmeans;
    std::uint64_t seed = 0;
    Matrix landmarks;  // r x d
    kernels::KernelFunction kernel;
};

using EmbeddingSource = std::variant<ConventionalSource, ClusteredSource>;

// One embedding of the training samples plus the linear map needed to embed
// unseen samples: conventional rows embed as k(x, train)[:, columns] * map,
// clustered rows as k(x, landmarks) * map.
struct DenseEmbedding {
    Matrix values;  // n x r, row i = training sample i
    Matrix map;     // s x r (conventional) or r x r (clustered, W_Z^{-1/2})
    EmbeddingSource source;
    std::string kernel_name;

    Index rows() const { return values.rows(); }
    Index width() const { return values.cols(); }
    bool is_conventional() const { return std::holds_alternative<ConventionalSource>(source); }

    // kernel_rows: m x n_train kernel values against every training sample.
    Matrix embed_kernel_rows(const Matrix& kernel_rows) const;
    // features: m x d raw samples.
    Matrix embed_features(const Matrix& features) const;
    // One-line description recorded in sidecars and logs.
    std::string describe() const;
};

struct EmbeddingEnsemble {
    std::vector<DenseEmbedding> members;

    Index size() const { return static_cast<Index>(members.size()); }
    Index samples() const { return members.empty() ? 0 : members.front().rows(); }
    std::vector<Index> widths() const;
    // Row subsets of every member (training-time batching).
    std::vector<Matrix> gather(std::span<const Index> rows) const;
    // Throws ShapeError when members disagree on n or the ensemble is empty.
    void check() const;
};

// L = E U_r Lambda_r^{-1/2}, E = K[:, cols], (U, Lambda) = top-r eigenpairs of
// W = K[cols, cols]. Eigenvalues at or below 1e-10 * lambda_max get a zero
// column in the map; the count kept is the effective rank.
DenseEmbedding conventional_single(const kernels::KernelMatrix& k, std::span<const Index> cols, Index r);

// One draw of s*P distinct columns, split into P consecutive groups.
EmbeddingEnsemble conventional_ensemble(const kernels::KernelMatrix& k, Index members, Index s, Index r,
                                        std::uint64_t seed);

using Schedule = std::vector<std::pair<Index, Index>>;  // (s, r) per member

// P = 6, s = ceil(n / {16, 12, 8, 6, 4, 3}) capped at n, r = min(s, 128).
Schedule default_schedule(Index n);

// Column groups come from one global draw when sum(s) <= n; otherwise each
// group is drawn independently (distinct within the group).
EmbeddingEnsemble varied_ensemble(const kernels::KernelMatrix& k, const Schedule& schedule, std::uint64_t seed);

// L_Z = E_Z W_Z^{-1/2}, (E_Z)_ij = k(x_i, z_j), (W_Z)_ij = k(z_i, z_j).
DenseEmbedding clustered_embed(const Matrix& x, const clustering::LandmarkSet& z,
                               const kernels::KernelFunction& kfn, std::string kernel_name = {});

// Five members, one per clustering method in fixed order.
EmbeddingEnsemble clustered_ensemble(const Matrix& x, Index r, const kernels::KernelFunction& kfn,
                                     std::uint64_t seed, const clustering::ClusteringOptions& options = {},
                                     std::string kernel_name = {}, int threads = 1);

}  // namespace dkmo::nystroem
