#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dkmo/linalg.hpp"

namespace dkmo::kernels {

using linalg::Matrix;

// n x n symmetric similarity table. Construction checks squareness,
// finiteness and symmetry (1e-8); diagonal positivity and PSD-ness are
// reported by validate_kernel.
class KernelMatrix {
public:
    KernelMatrix() = default;
    explicit KernelMatrix(Matrix values, std::string name = {});

    Eigen::Index size() const { return values_.rows(); }
    const Matrix& values() const { return values_; }
    const std::string& name() const { return name_; }
    double operator()(Eigen::Index i, Eigen::Index j) const { return values_(i, j); }

    KernelMatrix renamed(std::string name) const { return KernelMatrix(values_, std::move(name)); }

private:
    Matrix values_;
    std::string name_;
};

// n x n pairwise distances: symmetric, non-negative, exactly zero diagonal.
class DistanceMatrix {
public:
    DistanceMatrix() = default;
    explicit DistanceMatrix(Matrix values, std::string name = {});

    Eigen::Index size() const { return values_.rows(); }
    const Matrix& values() const { return values_; }
    const std::string& name() const { return name_; }

private:
    Matrix values_;
    std::string name_;
};

enum class KernelKind { rbf, exp_chi2, linear };

std::string to_string(KernelKind kind);
KernelKind kernel_kind_from_string(const std::string& s);

// Pointwise kernel used for clustered embeddings and out-of-sample rows.
//   rbf:      exp(-gamma |x - y|^2)
//   exp_chi2: exp(-gamma sum_k (x_k - y_k)^2 / (x_k + y_k)), features >= 0
//   linear:   <x, y>
// With `normalized` set the value is divided by sqrt(k(x,x) k(y,y)); this
// only changes linear kernels, the others already have unit diagonal.
struct KernelFunction {
    KernelKind kind = KernelKind::rbf;
    double gamma = 1.0;
    bool normalized = false;

    double operator()(const Eigen::Ref<const linalg::Vector>& x,
                      const Eigen::Ref<const linalg::Vector>& y) const;
};

// Pairwise k(a_i, b_j) for rows of a and b.
Matrix cross_gram(const Matrix& a, const Matrix& b, const KernelFunction& kfn);

// Pairwise base distances between feature rows: squared Euclidean for rbf,
// chi-squared for exp_chi2. Not defined for linear kernels.
DistanceMatrix feature_distances(const Matrix& x, KernelKind kind);

KernelMatrix rbf_kernel(const Matrix& x, double gamma, std::string name = "rbf");
KernelMatrix kernel_from_features(const Matrix& x, const KernelFunction& kfn, std::string name);
KernelMatrix exp_distance_kernel(const DistanceMatrix& d, double gamma, std::string name = {});

// 1 / mean of the off-diagonal distances.
double estimate_gamma(const DistanceMatrix& d);

KernelMatrix normalize_kernel(const KernelMatrix& k);
KernelMatrix uniform_average(std::span<const KernelMatrix> ks, std::string name = "uniform");

struct KernelReport {
    double max_asymmetry = 0.0;
    double min_diagonal = 0.0;
    double max_diagonal = 0.0;
    std::optional<double> min_eigenvalue;
    std::optional<double> max_eigenvalue;

    bool symmetric = false;
    bool positive_diagonal = false;
    bool unit_diagonal = false;
    std::optional<bool> psd;  // min >= -1e-6 * max, when checked

    bool ok() const { return symmetric && positive_diagonal && psd.value_or(true); }
};

KernelReport validate_kernel(const Matrix& k, bool check_psd);
inline KernelReport validate_kernel(const KernelMatrix& k, bool check_psd) {
    return validate_kernel(k.values(), check_psd);
}

}  // namespace dkmo::kernels
