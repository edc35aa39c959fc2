#include "dkmo/synthetic.hpp"

#include <bit>
#include <cmath>
#include <numbers>

#include "dkmo/error.hpp"
#include "dkmo/random.hpp"

namespace dkmo::data {

namespace {

std::vector<int> round_robin(Index n, int classes) {
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = static_cast<int>(i % classes);
    return labels;
}

void require(bool ok, const char* what) {
    if (!ok) throw InputError(what);
}

}  // namespace

Dataset blobs(const BlobsParams& p, std::uint64_t seed) {
    require(p.classes >= 1 && p.samples >= p.classes && p.dim >= 2 && p.sigma >= 0.0, "invalid blob parameters");
    Rng rng(derive_seed(seed, "blobs"));
    const double step = 2.0 * std::numbers::pi / p.classes;
    const double radius = p.classes > 1 ? p.separation / (2.0 * std::sin(step / 2.0)) : 0.0;
    Dataset ds;
    ds.labels = round_robin(p.samples, p.classes);
    Matrix x(p.samples, p.dim);
    for (Index i = 0; i < p.samples; ++i) {
        const int c = ds.labels[static_cast<std::size_t>(i)];
        for (Index j = 0; j < p.dim; ++j) x(i, j) = p.sigma * rng.normal();
        x(i, 0) += radius * std::cos(step * c);
        x(i, 1) += radius * std::sin(step * c);
    }
    ds.views.push_back({"x", std::move(x)});
    return ds;
}

Dataset rings(const RingsParams& p, std::uint64_t seed) {
    require(p.classes >= 1 && p.samples >= p.classes && p.noise >= 0.0, "invalid ring parameters");
    Rng rng(derive_seed(seed, "rings"));
    Dataset ds;
    ds.labels = round_robin(p.samples, p.classes);
    Matrix x(p.samples, 2);
    for (Index i = 0; i < p.samples; ++i) {
        const double r = ds.labels[static_cast<std::size_t>(i)] + 1.0 + p.noise * rng.normal();
        const double t = rng.uniform(0.0, 2.0 * std::numbers::pi);
        x(i, 0) = r * std::cos(t);
        x(i, 1) = r * std::sin(t);
    }
    ds.views.push_back({"x", std::move(x)});
    return ds;
}

int multiview_group(int c, int view) { return std::popcount(static_cast<unsigned>(c & (view + 1))) & 1; }

Dataset multiview(const MultiviewParams& p, std::uint64_t seed) {
    require(p.classes >= 2 && std::has_single_bit(static_cast<unsigned>(p.classes)), "classes must be a power of two");
    require(p.views >= 1 && p.views < p.classes, "views must lie in [1, classes)");
    require(p.samples >= p.classes && p.nuisance >= 0, "invalid multiview parameters");
    Dataset ds;
    ds.labels = round_robin(p.samples, p.classes);
    for (int v = 0; v < p.views; ++v) {
        Rng rng(derive_seed(derive_seed(seed, "multiview"), static_cast<std::uint64_t>(v)));
        Matrix x(p.samples, 2 + p.nuisance);
        for (Index i = 0; i < p.samples; ++i) {
            const int c = ds.labels[static_cast<std::size_t>(i)];
            if (multiview_group(c, v) == 0) {
                x(i, 0) = p.core * rng.normal();
                x(i, 1) = p.core * rng.normal();
            } else {
                const double r = p.radius + p.noise * rng.normal();
                const double t = rng.uniform(0.0, 2.0 * std::numbers::pi);
                x(i, 0) = r * std::cos(t);
                x(i, 1) = r * std::sin(t);
            }
            for (Index j = 0; j < p.nuisance; ++j) x(i, 2 + j) = rng.normal();
        }
        ds.views.push_back({"view" + std::to_string(v), std::move(x)});
    }
    return ds;
}

}  // namespace dkmo::data
