#include "dkmo/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "dkmo/error.hpp"

namespace dkmo::linalg {

double max_asymmetry(const Matrix& m) {
    if (m.rows() != m.cols()) return std::numeric_limits<double>::infinity();
    return (m - m.transpose()).cwiseAbs().maxCoeff();
}

bool is_symmetric(const Matrix& m, double tol) {
    if (m.rows() != m.cols()) return false;
    if (m.size() == 0) return true;
    return max_asymmetry(m) <= tol;
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

namespace {

void require_symmetric(const Matrix& m, const char* op) {
    if (m.rows() != m.cols()) {
        throw ShapeError(std::string(op) + ": matrix is " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + ", expected square");
    }
    if (!m.allFinite()) throw InputError(std::string(op) + ": matrix has non-finite entries");
    if (!is_symmetric(m)) {
        throw SymmetryError(std::string(op) + ": matrix asymmetric (max deviation " +
                            std::to_string(max_asymmetry(m)) + ")");
    }
}

// Cyclic Jacobi. a is overwritten (its diagonal converges to the spectrum);
// v accumulates the rotations.
void jacobi_sweeps(Matrix& a, Matrix& v) {
    const Eigen::Index n = a.rows();
    v.setIdentity(n, n);
    if (n < 2) return;
    constexpr int kMaxSweeps = 100;
    const double scale = a.norm();
    if (scale == 0.0) return;

    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        double off = 0.0;
        for (Eigen::Index q = 1; q < n; ++q)
            for (Eigen::Index p = 0; p < q; ++p) off += a(p, q) * a(p, q);
        if (std::sqrt(off) <= 1e-15 * scale) return;

        for (Eigen::Index q = 1; q < n; ++q) {
            for (Eigen::Index p = 0; p < q; ++p) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double app = a(p, p);
                const double aqq = a(q, q);
                // Negligible relative to both diagonals: drop it.
                if (sweep > 3 && std::abs(app) + 100.0 * std::abs(apq) == std::abs(app) &&
                    std::abs(aqq) + 100.0 * std::abs(apq) == std::abs(aqq)) {
                    a(p, q) = 0.0;
                    a(q, p) = 0.0;
                    continue;
                }
                const double theta = (aqq - app) / (2.0 * apq);
                double t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                if (theta < 0.0) t = -t;
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;

                for (Eigen::Index k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
}

void fix_sign(Eigen::Ref<Vector> col) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < col.size(); ++i)
        if (std::abs(col(i)) > std::abs(col(best))) best = i;
    if (col(best) < 0.0) col = -col;
}

}  // namespace

EigenDecomposition sym_eig(const Matrix& m) {
    require_symmetric(m, "sym_eig");
    const Eigen::Index n = m.rows();
    Matrix a = 0.5 * (m + m.transpose());
    Matrix v;
    jacobi_sweeps(a, v);

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });

    EigenDecomposition out;
    out.values.resize(n);
    out.vectors.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index src = order[static_cast<std::size_t>(k)];
        out.values(k) = a(src, src);
        out.vectors.col(k) = v.col(src).normalized();
        fix_sign(out.vectors.col(k));
    }
    return out;
}

Matrix reconstruct(const EigenDecomposition& e) {
    return e.vectors * e.values.asDiagonal() * e.vectors.transpose();
}

namespace {

// Extends the orthonormal columns [0, filled) of q to a full orthonormal set
// by Gram-Schmidt over the standard basis.
void complete_orthonormal(Matrix& q, Eigen::Index filled) {
    const Eigen::Index n = q.rows();
    Eigen::Index next_basis = 0;
    for (Eigen::Index col = filled; col < q.cols(); ++col) {
        while (next_basis < n) {
            Vector cand = Vector::Unit(n, next_basis++);
            for (int pass = 0; pass < 2; ++pass)
                for (Eigen::Index j = 0; j < col; ++j) cand -= q.col(j).dot(cand) * q.col(j);
            const double norm = cand.norm();
            if (norm > 1e-8) {
                q.col(col) = cand / norm;
                break;
            }
        }
    }
}

}  // namespace

SvdResult truncated_svd(const Matrix& m, Eigen::Index r) {
    const Eigen::Index small = std::min(m.rows(), m.cols());
    if (r < 1 || r > small) {
        throw RankError("truncated_svd: rank " + std::to_string(r) + " outside [1, " +
                        std::to_string(small) + "]");
    }
    if (!m.allFinite()) throw InputError("truncated_svd: matrix has non-finite entries");

    const bool tall = m.rows() >= m.cols();
    Matrix gram = tall ? Matrix(m.transpose() * m) : Matrix(m * m.transpose());
    gram = 0.5 * (gram + gram.transpose());
    const EigenDecomposition eig = sym_eig(gram);

    SvdResult out;
    out.s.resize(r);
    Matrix right = eig.vectors.leftCols(r);  // V if tall, U otherwise
    Matrix left(tall ? m.rows() : m.cols(), r);
    const double cutoff = std::sqrt(std::max(eig.values(0), 0.0)) * 1e-12;
    Eigen::Index filled = 0;
    for (Eigen::Index i = 0; i < r; ++i) {
        const double sigma = std::sqrt(std::max(eig.values(i), 0.0));
        out.s(i) = sigma;
        if (sigma > cutoff && sigma > 0.0) {
            Vector col = tall ? Vector(m * right.col(i)) : Vector(m.transpose() * right.col(i));
            left.col(i) = col / sigma;
            filled = i + 1;
        } else {
            out.s(i) = 0.0;
        }
    }
    complete_orthonormal(left, filled);

    if (tall) {
        out.u = std::move(left);
        out.v = std::move(right);
    } else {
        out.u = std::move(right);
        out.v = std::move(left);
    }
    return out;
}

Matrix inverse_sqrt_psd(const Matrix& m, std::optional<double> eps) {
    require_symmetric(m, "inverse_sqrt_psd");
    const EigenDecomposition e = sym_eig(m);
    const double top = e.values.size() > 0 ? e.values(0) : 0.0;
    const double bottom = e.values.size() > 0 ? e.values(e.values.size() - 1) : 0.0;
    if (bottom < -1e-6 * std::max(1.0, std::abs(top))) {
        throw NotPsdError("inverse_sqrt_psd: eigenvalue " + std::to_string(bottom) +
                          " is below the PSD tolerance");
    }
    double floor = eps.value_or(1e-10 * top);
    if (!(floor > 0.0)) floor = std::numeric_limits<double>::min();
    Vector scaled(e.values.size());
    for (Eigen::Index i = 0; i < e.values.size(); ++i)
        scaled(i) = 1.0 / std::sqrt(std::max(e.values(i), floor));
    Matrix out = e.vectors * scaled.asDiagonal() * e.vectors.transpose();
    return 0.5 * (out + out.transpose());
}

Matrix psd_clip(const Matrix& m) {
    require_symmetric(m, "psd_clip");
    EigenDecomposition e = sym_eig(m);
    e.values = e.values.cwiseMax(0.0);
    Matrix out = reconstruct(e);
    return 0.5 * (out + out.transpose());
}

Matrix select(const Matrix& m, std::span<const Eigen::Index> rows, std::span<const Eigen::Index> cols) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j)
        for (std::size_t i = 0; i < rows.size(); ++i)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(rows[i], cols[j]);
    return out;
}

Matrix select_rows(const Matrix& m, std::span<const Eigen::Index> rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
    return out;
}

Matrix select_cols(const Matrix& m, std::span<const Eigen::Index> cols) {
    Matrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(cols[j]);
    return out;
}

}  // namespace dkmo::linalg
