#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dkmo/linalg.hpp"

// Landmark selection for clustered Nystroem embeddings. Every method is a
// deterministic function of (features, r, seed); ties are broken towards
// the lowest index.
namespace dkmo::clustering {

using linalg::Matrix;

enum class ClusterMethod { kmeans, kmedians, kmedoids, agglomerative, spectral };

std::string to_string(ClusterMethod m);
ClusterMethod cluster_method_from_string(const std::string& s);

// Fixed order of the five-member ensemble.
inline constexpr ClusterMethod kEnsembleMethods[] = {
    ClusterMethod::kmeans, ClusterMethod::kmedians, ClusterMethod::kmedoids,
    ClusterMethod::agglomerative, ClusterMethod::spectral};

struct LandmarkSet {
    Matrix points;  // r x d
    ClusterMethod method = ClusterMethod::kmeans;
    std::uint64_t seed = 0;
    std::vector<int> assignment;      // cluster of each input row
    std::vector<double> objective;    // per-iteration objective (iterative methods)
};

struct ClusteringOptions {
    int max_iterations = 300;
    // Spectral neighbourhood size; default max(10, ceil(log2 n)).
    std::optional<int> k_neighbors;
};

LandmarkSet kmeans(const Matrix& x, Eigen::Index r, std::uint64_t seed, int max_iterations = 300);
LandmarkSet kmedians(const Matrix& x, Eigen::Index r, std::uint64_t seed, int max_iterations = 300);
LandmarkSet kmedoids(const Matrix& x, Eigen::Index r, std::uint64_t seed, int max_iterations = 300);
LandmarkSet agglomerative(const Matrix& x, Eigen::Index r);
LandmarkSet spectral_knn(const Matrix& x, Eigen::Index r, std::optional<int> k_neighbors, std::uint64_t seed);

LandmarkSet run_method(ClusterMethod method, const Matrix& x, Eigen::Index r, std::uint64_t seed,
                       const ClusteringOptions& options = {});

// One landmark set per method in kEnsembleMethods order. Member seeds are
// derived from `seed` and the method name. threads > 1 runs members
// concurrently; results are identical either way.
std::vector<LandmarkSet> landmark_ensemble(const Matrix& x, Eigen::Index r, std::uint64_t seed,
                                           const ClusteringOptions& options = {}, int threads = 1);

int default_k_neighbors(Eigen::Index n);

// sum_i min_j |x_i - z_j|^2
double quantization_error(const Matrix& x, const Matrix& landmarks);

// Coordinatewise median (mean of the two middle values for even counts).
linalg::Vector coordinatewise_median(const Matrix& x);

}  // namespace dkmo::clustering
