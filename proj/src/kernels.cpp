#include "dkmo/kernels.hpp"

#include <cmath>

#include "dkmo/error.hpp"

namespace dkmo::kernels {

KernelMatrix::KernelMatrix(Matrix values, std::string name)
    : values_(std::move(values)), name_(std::move(name)) {
    if (values_.rows() != values_.cols()) {
        throw ShapeError("kernel '" + name_ + "' is " + std::to_string(values_.rows()) + "x" +
                         std::to_string(values_.cols()) + ", expected square");
    }
    if (!values_.allFinite()) throw InputError("kernel '" + name_ + "' has non-finite entries");
    if (!linalg::is_symmetric(values_)) {
        throw SymmetryError("kernel '" + name_ + "' is not symmetric (max deviation " +
                            std::to_string(linalg::max_asymmetry(values_)) + ")");
    }
}

DistanceMatrix::DistanceMatrix(Matrix values, std::string name)
    : values_(std::move(values)), name_(std::move(name)) {
    if (values_.rows() != values_.cols()) {
        throw ShapeError("distance matrix '" + name_ + "' is not square");
    }
    if (!values_.allFinite()) throw InputError("distance matrix '" + name_ + "' has non-finite entries");
    if (!linalg::is_symmetric(values_)) {
        throw SymmetryError("distance matrix '" + name_ + "' is not symmetric");
    }
    if (values_.size() > 0 && values_.minCoeff() < 0.0) {
        throw InputError("distance matrix '" + name_ + "' has negative entries");
    }
    for (Eigen::Index i = 0; i < values_.rows(); ++i) {
        if (values_(i, i) != 0.0) {
            throw InputError("distance matrix '" + name_ + "' has non-zero diagonal at row " +
                             std::to_string(i));
        }
    }
}

std::string to_string(KernelKind kind) {
    switch (kind) {
        case KernelKind::rbf: return "rbf";
        case KernelKind::exp_chi2: return "exp_chi2";
        case KernelKind::linear: return "linear";
    }
    return "?";
}

KernelKind kernel_kind_from_string(const std::string& s) {
    if (s == "rbf") return KernelKind::rbf;
    if (s == "exp_chi2") return KernelKind::exp_chi2;
    if (s == "linear") return KernelKind::linear;
    throw ConfigError("unknown kernel type '" + s + "'");
}

namespace {

double chi2_distance(const Eigen::Ref<const linalg::Vector>& x, const Eigen::Ref<const linalg::Vector>& y) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        const double s = x(k) + y(k);
        if (s > 0.0) {
            const double d = x(k) - y(k);
            acc += d * d / s;
        }
    }
    return acc;
}

}  // namespace

double KernelFunction::operator()(const Eigen::Ref<const linalg::Vector>& x,
                                  const Eigen::Ref<const linalg::Vector>& y) const {
    switch (kind) {
        case KernelKind::rbf: return std::exp(-gamma * (x - y).squaredNorm());
        case KernelKind::exp_chi2: return std::exp(-gamma * chi2_distance(x, y));
        case KernelKind::linear: {
            if (!normalized) return x.dot(y);
            const double denom = x.norm() * y.norm();
            return denom > 0.0 ? x.dot(y) / denom : 0.0;
        }
    }
    return 0.0;
}

namespace {

void require_finite_features(const Matrix& x, const char* op) {
    if (!x.allFinite()) throw InputError(std::string(op) + ": features contain non-finite values");
}

// |a_i - b_j|^2 via the Gram expansion, clamped at zero.
Matrix squared_distances(const Matrix& a, const Matrix& b) {
    const linalg::Vector an = a.rowwise().squaredNorm();
    const linalg::Vector bn = b.rowwise().squaredNorm();
    Matrix d = -2.0 * a * b.transpose();
    d.colwise() += an;
    d.rowwise() += bn.transpose();
    return d.cwiseMax(0.0);
}

}  // namespace

Matrix cross_gram(const Matrix& a, const Matrix& b, const KernelFunction& kfn) {
    if (a.cols() != b.cols()) {
        throw ShapeError("cross_gram: feature widths differ (" + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.cols()) + ")");
    }
    require_finite_features(a, "cross_gram");
    require_finite_features(b, "cross_gram");
    switch (kfn.kind) {
        case KernelKind::rbf: return (-kfn.gamma * squared_distances(a, b)).array().exp().matrix();
        case KernelKind::linear: {
            if (!kfn.normalized) return a * b.transpose();
            auto unit = [](const Matrix& m) {
                linalg::Vector norms = m.rowwise().norm();
                norms = norms.unaryExpr([](double v) { return v > 0.0 ? 1.0 / v : 0.0; });
                return Matrix(norms.asDiagonal() * m);
            };
            return unit(a) * unit(b).transpose();
        }
        case KernelKind::exp_chi2: {
            Matrix out(a.rows(), b.rows());
            for (Eigen::Index j = 0; j < b.rows(); ++j)
                for (Eigen::Index i = 0; i < a.rows(); ++i)
                    out(i, j) = std::exp(-kfn.gamma * chi2_distance(a.row(i).transpose(), b.row(j).transpose()));
            return out;
        }
    }
    return {};
}

DistanceMatrix feature_distances(const Matrix& x, KernelKind kind) {
    require_finite_features(x, "feature_distances");
    const Eigen::Index n = x.rows();
    Matrix d(n, n);
    switch (kind) {
        case KernelKind::rbf:
            d = squared_distances(x, x);
            break;
        case KernelKind::exp_chi2:
            for (Eigen::Index j = 0; j < n; ++j)
                for (Eigen::Index i = 0; i < n; ++i)
                    d(i, j) = chi2_distance(x.row(i).transpose(), x.row(j).transpose());
            break;
        case KernelKind::linear:
            throw ConfigError("feature_distances: linear kernels have no base distance");
    }
    d = 0.5 * (d + d.transpose());
    d.diagonal().setZero();
    return DistanceMatrix(std::move(d));
}

KernelMatrix rbf_kernel(const Matrix& x, double gamma, std::string name) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InputError("rbf_kernel: gamma must be positive");
    if (x.rows() < 1) throw InputError("rbf_kernel: need at least one sample");
    require_finite_features(x, "rbf_kernel");
    Matrix k = (-gamma * squared_distances(x, x)).array().exp().matrix();
    k = 0.5 * (k + k.transpose());
    k.diagonal().setOnes();
    return KernelMatrix(std::move(k), std::move(name));
}

KernelMatrix kernel_from_features(const Matrix& x, const KernelFunction& kfn, std::string name) {
    if (kfn.kind == KernelKind::rbf) return rbf_kernel(x, kfn.gamma, std::move(name));
    Matrix k = cross_gram(x, x, kfn);
    k = 0.5 * (k + k.transpose());
    if (kfn.kind == KernelKind::exp_chi2) k.diagonal().setOnes();
    return KernelMatrix(std::move(k), std::move(name));
}

KernelMatrix exp_distance_kernel(const DistanceMatrix& d, double gamma, std::string name) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InputError("exp_distance_kernel: gamma must be positive");
    Matrix k = (-gamma * d.values()).array().exp().matrix();
    if (name.empty()) name = d.name();
    return KernelMatrix(std::move(k), std::move(name));
}

double estimate_gamma(const DistanceMatrix& d) {
    const Eigen::Index n = d.size();
    if (n < 2) throw InputError("estimate_gamma: need at least two samples");
    // Diagonal is exactly zero, so the full sum equals the off-diagonal sum.
    const double mean = d.values().sum() / static_cast<double>(n * (n - 1));
    if (!(mean > 0.0)) throw InputError("estimate_gamma: all pairwise distances are zero");
    return 1.0 / mean;
}

KernelMatrix normalize_kernel(const KernelMatrix& k) {
    const linalg::Vector diag = k.values().diagonal();
    for (Eigen::Index i = 0; i < diag.size(); ++i) {
        if (!(diag(i) > 0.0)) {
            throw InputError("normalize_kernel: kernel '" + k.name() + "' has non-positive diagonal entry at " +
                             std::to_string(i));
        }
    }
    const linalg::Vector inv = diag.cwiseSqrt().cwiseInverse();
    Matrix out = inv.asDiagonal() * k.values() * inv.asDiagonal();
    out = 0.5 * (out + out.transpose());
    out.diagonal().setOnes();
    return KernelMatrix(std::move(out), k.name());
}

KernelMatrix uniform_average(std::span<const KernelMatrix> ks, std::string name) {
    if (ks.empty()) throw InputError("uniform_average: no kernels given");
    const Eigen::Index n = ks.front().size();
    Matrix acc = Matrix::Zero(n, n);
    for (const auto& k : ks) {
        if (k.size() != n) {
            throw ShapeError("uniform_average: kernel '" + k.name() + "' has size " + std::to_string(k.size()) +
                             ", expected " + std::to_string(n));
        }
        acc += k.values();
    }
    acc /= static_cast<double>(ks.size());
    return KernelMatrix(std::move(acc), std::move(name));
}

KernelReport validate_kernel(const Matrix& k, bool check_psd) {
    KernelReport r;
    r.max_asymmetry = linalg::max_asymmetry(k);
    r.symmetric = k.rows() == k.cols() && k.allFinite() && r.max_asymmetry <= linalg::kSymmetryTolerance;
    if (k.rows() == k.cols() && k.rows() > 0) {
        r.min_diagonal = k.diagonal().minCoeff();
        r.max_diagonal = k.diagonal().maxCoeff();
        r.positive_diagonal = r.min_diagonal > 0.0;
        r.unit_diagonal = (k.diagonal().array() - 1.0).abs().maxCoeff() <= 1e-12;
    }
    if (check_psd && r.symmetric && k.rows() > 0) {
        const auto eig = linalg::sym_eig(0.5 * (k + k.transpose()));
        r.max_eigenvalue = eig.values(0);
        r.min_eigenvalue = eig.values(eig.values.size() - 1);
        r.psd = *r.min_eigenvalue >= -1e-6 * std::max(*r.max_eigenvalue, 0.0);
    } else if (check_psd) {
        r.psd = false;
    }
    return r;
}

}  // namespace dkmo::kernels
