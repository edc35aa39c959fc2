#include "dkmo/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>

#include "dkmo/error.hpp"
#include "dkmo/random.hpp"

namespace dkmo::clustering {

using linalg::Vector;
using Index = Eigen::Index;

std::string to_string(ClusterMethod m) {
    switch (m) {
        case ClusterMethod::kmeans: return "kmeans";
        case ClusterMethod::kmedians: return "kmedians";
        case ClusterMethod::kmedoids: return "kmedoids";
        case ClusterMethod::agglomerative: return "agglomerative";
        case ClusterMethod::spectral: return "spectral";
    }
    return "?";
}

ClusterMethod cluster_method_from_string(const std::string& s) {
    for (ClusterMethod m : kEnsembleMethods)
        if (to_string(m) == s) return m;
    throw ConfigError("unknown clustering method '" + s + "'");
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_inputs(const Matrix& x, Index r, const char* op) {
    if (x.rows() < 1) throw InputError(std::string(op) + ": empty feature matrix");
    if (r < 1 || r > x.rows()) {
        throw InputError(std::string(op) + ": cluster count " + std::to_string(r) + " outside [1, " +
                         std::to_string(x.rows()) + "]");
    }
    if (!x.allFinite()) throw InputError(std::string(op) + ": features contain non-finite values");
}

enum class Metric { sq_euclidean, l1, euclidean };

double distance(const Matrix& a, Index i, const Matrix& b, Index j, Metric metric) {
    switch (metric) {
        case Metric::sq_euclidean: return (a.row(i) - b.row(j)).squaredNorm();
        case Metric::l1: return (a.row(i) - b.row(j)).lpNorm<1>();
        case Metric::euclidean: return (a.row(i) - b.row(j)).norm();
    }
    return 0.0;
}

// k-means++ style seeding: first centre uniform, the rest drawn with
// probability proportional to the distance to the nearest chosen centre.
std::vector<Index> plus_plus_seeds(const Matrix& x, Index r, Metric metric, Rng& rng) {
    const Index n = x.rows();
    std::vector<Index> chosen;
    std::vector<bool> taken(static_cast<std::size_t>(n), false);
    std::vector<double> nearest(static_cast<std::size_t>(n), kInf);
    Index first = static_cast<Index>(rng.index(static_cast<std::size_t>(n)));
    chosen.push_back(first);
    taken[static_cast<std::size_t>(first)] = true;
    while (static_cast<Index>(chosen.size()) < r) {
        const Index last = chosen.back();
        double total = 0.0;
        for (Index i = 0; i < n; ++i) {
            auto& d = nearest[static_cast<std::size_t>(i)];
            d = std::min(d, distance(x, i, x, last, metric));
            if (!taken[static_cast<std::size_t>(i)]) total += d;
        }
        Index pick = -1;
        if (total > 0.0) {
            double target = rng.uniform() * total;
            for (Index i = 0; i < n; ++i) {
                if (taken[static_cast<std::size_t>(i)]) continue;
                const double d = nearest[static_cast<std::size_t>(i)];
                if (d <= 0.0) continue;
                pick = i;
                target -= d;
                if (target < 0.0) break;
            }
        }
        if (pick < 0) {
            // Every remaining point coincides with a centre.
            for (Index i = 0; i < n; ++i) {
                if (!taken[static_cast<std::size_t>(i)]) {
                    pick = i;
                    break;
                }
            }
        }
        chosen.push_back(pick);
        taken[static_cast<std::size_t>(pick)] = true;
    }
    return chosen;
}

// Nearest centre per row; returns the total objective.
double assign(const Matrix& x, const Matrix& centres, Metric metric, std::vector<int>& assignment) {
    double total = 0.0;
    assignment.resize(static_cast<std::size_t>(x.rows()));
    for (Index i = 0; i < x.rows(); ++i) {
        double best = kInf;
        int best_j = 0;
        for (Index j = 0; j < centres.rows(); ++j) {
            const double d = distance(x, i, centres, j, metric);
            if (d < best) {
                best = d;
                best_j = static_cast<int>(j);
            }
        }
        assignment[static_cast<std::size_t>(i)] = best_j;
        total += best;
    }
    return total;
}

double objective(const Matrix& x, const Matrix& centres, const std::vector<int>& assignment, Metric metric) {
    double total = 0.0;
    for (Index i = 0; i < x.rows(); ++i) total += distance(x, i, centres, assignment[static_cast<std::size_t>(i)], metric);
    return total;
}

// Empty clusters take the point farthest from its current centre (drawn from
// clusters that keep at least one member).
void repair_empty(const Matrix& x, Matrix& centres, std::vector<int>& assignment, Metric metric) {
    const Index r = centres.rows();
    std::vector<int> counts(static_cast<std::size_t>(r), 0);
    for (int a : assignment) ++counts[static_cast<std::size_t>(a)];
    for (Index j = 0; j < r; ++j) {
        if (counts[static_cast<std::size_t>(j)] > 0) continue;
        Index far = -1;
        double far_d = -1.0;
        for (Index i = 0; i < x.rows(); ++i) {
            const int a = assignment[static_cast<std::size_t>(i)];
            if (counts[static_cast<std::size_t>(a)] < 2) continue;
            const double d = distance(x, i, centres, a, metric);
            if (d > far_d) {
                far_d = d;
                far = i;
            }
        }
        if (far < 0) break;
        --counts[static_cast<std::size_t>(assignment[static_cast<std::size_t>(far)])];
        assignment[static_cast<std::size_t>(far)] = static_cast<int>(j);
        counts[static_cast<std::size_t>(j)] = 1;
        centres.row(j) = x.row(far);
    }
}

std::vector<std::vector<Index>> members_of(const std::vector<int>& assignment, Index r) {
    std::vector<std::vector<Index>> members(static_cast<std::size_t>(r));
    for (std::size_t i = 0; i < assignment.size(); ++i)
        members[static_cast<std::size_t>(assignment[i])].push_back(static_cast<Index>(i));
    return members;
}

enum class Representative { mean, median };

LandmarkSet lloyd(const Matrix& x, Index r, std::uint64_t seed, int max_iterations, Metric metric,
                  Representative rep, ClusterMethod method) {
    Rng rng(seed);
    const auto seeds = plus_plus_seeds(x, r, metric, rng);
    Matrix centres(r, x.cols());
    for (Index j = 0; j < r; ++j) centres.row(j) = x.row(seeds[static_cast<std::size_t>(j)]);

    LandmarkSet out;
    out.method = method;
    out.seed = seed;
    std::vector<int> previous;
    for (int iter = 0; iter < max_iterations; ++iter) {
        assign(x, centres, metric, out.assignment);
        if (iter > 0 && out.assignment == previous) break;
        repair_empty(x, centres, out.assignment, metric);
        const auto members = members_of(out.assignment, r);
        for (Index j = 0; j < r; ++j) {
            const auto& idx = members[static_cast<std::size_t>(j)];
            if (idx.empty()) continue;
            const Matrix sub = linalg::select_rows(x, idx);
            centres.row(j) = rep == Representative::mean ? Vector(sub.colwise().mean().transpose())
                                                         : coordinatewise_median(sub);
        }
        out.objective.push_back(objective(x, centres, out.assignment, metric));
        previous = out.assignment;
    }
    out.points = std::move(centres);
    return out;
}

Matrix pairwise_euclidean(const Matrix& x) {
    const Vector sq = x.rowwise().squaredNorm();
    Matrix d = -2.0 * x * x.transpose();
    d.colwise() += sq;
    d.rowwise() += sq.transpose();
    d = d.cwiseMax(0.0).cwiseSqrt();
    d = 0.5 * (d + d.transpose());
    d.diagonal().setZero();
    return d;
}

}  // namespace

Vector coordinatewise_median(const Matrix& x) {
    Vector med(x.cols());
    std::vector<double> col(static_cast<std::size_t>(x.rows()));
    for (Index j = 0; j < x.cols(); ++j) {
        for (Index i = 0; i < x.rows(); ++i) col[static_cast<std::size_t>(i)] = x(i, j);
        std::sort(col.begin(), col.end());
        const std::size_t n = col.size();
        med(j) = n % 2 ? col[n / 2] : 0.5 * (col[n / 2 - 1] + col[n / 2]);
    }
    return med;
}

LandmarkSet kmeans(const Matrix& x, Index r, std::uint64_t seed, int max_iterations) {
    check_inputs(x, r, "kmeans");
    return lloyd(x, r, seed, max_iterations, Metric::sq_euclidean, Representative::mean, ClusterMethod::kmeans);
}

LandmarkSet kmedians(const Matrix& x, Index r, std::uint64_t seed, int max_iterations) {
    check_inputs(x, r, "kmedians");
    return lloyd(x, r, seed, max_iterations, Metric::l1, Representative::median, ClusterMethod::kmedians);
}

LandmarkSet kmedoids(const Matrix& x, Index r, std::uint64_t seed, int max_iterations) {
    check_inputs(x, r, "kmedoids");
    const Index n = x.rows();
    const Matrix dist = pairwise_euclidean(x);
    Rng rng(seed);
    std::vector<Index> medoids = plus_plus_seeds(x, r, Metric::euclidean, rng);

    LandmarkSet out;
    out.method = ClusterMethod::kmedoids;
    out.seed = seed;

    auto total_cost = [&](const std::vector<Index>& meds, std::vector<int>* assignment) {
        double total = 0.0;
        if (assignment) assignment->resize(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) {
            double best = kInf;
            int best_j = 0;
            for (std::size_t j = 0; j < meds.size(); ++j) {
                if (dist(i, meds[j]) < best) {
                    best = dist(i, meds[j]);
                    best_j = static_cast<int>(j);
                }
            }
            if (assignment) (*assignment)[static_cast<std::size_t>(i)] = best_j;
            total += best;
        }
        return total;
    };

    // Alternating phase: assign, then move each medoid to the member that
    // minimises the summed distance within its cluster.
    std::vector<int> previous;
    int iter = 0;
    for (; iter < max_iterations; ++iter) {
        out.objective.push_back(total_cost(medoids, &out.assignment));
        if (iter > 0 && out.assignment == previous) break;
        previous = out.assignment;
        const auto members = members_of(out.assignment, r);
        for (Index j = 0; j < r; ++j) {
            const auto& idx = members[static_cast<std::size_t>(j)];
            if (idx.empty()) continue;
            Index best = medoids[static_cast<std::size_t>(j)];
            double best_sum = kInf;
            for (Index cand : idx) {
                double s = 0.0;
                for (Index other : idx) s += dist(cand, other);
                if (s < best_sum) {
                    best_sum = s;
                    best = cand;
                }
            }
            medoids[static_cast<std::size_t>(j)] = best;
        }
    }

    // PAM swap phase: apply the best improving (medoid, non-medoid) swap
    // until none improves.
    std::vector<bool> is_medoid(static_cast<std::size_t>(n), false);
    for (Index m : medoids) is_medoid[static_cast<std::size_t>(m)] = true;
    std::vector<double> d1(static_cast<std::size_t>(n)), d2(static_cast<std::size_t>(n));
    std::vector<int> nearest(static_cast<std::size_t>(n));
    for (; iter < max_iterations; ++iter) {
        for (Index i = 0; i < n; ++i) {
            double a = kInf, b = kInf;
            int ia = 0;
            for (std::size_t j = 0; j < medoids.size(); ++j) {
                const double d = dist(i, medoids[j]);
                if (d < a) {
                    b = a;
                    a = d;
                    ia = static_cast<int>(j);
                } else if (d < b) {
                    b = d;
                }
            }
            d1[static_cast<std::size_t>(i)] = a;
            d2[static_cast<std::size_t>(i)] = b;
            nearest[static_cast<std::size_t>(i)] = ia;
        }
        double best_delta = 0.0;
        int best_slot = -1;
        Index best_cand = -1;
        for (std::size_t slot = 0; slot < medoids.size(); ++slot) {
            for (Index h = 0; h < n; ++h) {
                if (is_medoid[static_cast<std::size_t>(h)]) continue;
                double delta = 0.0;
                for (Index j = 0; j < n; ++j) {
                    const auto sj = static_cast<std::size_t>(j);
                    const double dh = dist(j, h);
                    if (nearest[sj] == static_cast<int>(slot)) {
                        delta += std::min(d2[sj], dh) - d1[sj];
                    } else if (dh < d1[sj]) {
                        delta += dh - d1[sj];
                    }
                }
                if (delta < best_delta - 1e-12) {
                    best_delta = delta;
                    best_slot = static_cast<int>(slot);
                    best_cand = h;
                }
            }
        }
        if (best_slot < 0) break;
        is_medoid[static_cast<std::size_t>(medoids[static_cast<std::size_t>(best_slot)])] = false;
        is_medoid[static_cast<std::size_t>(best_cand)] = true;
        medoids[static_cast<std::size_t>(best_slot)] = best_cand;
        out.objective.push_back(total_cost(medoids, nullptr));
    }

    total_cost(medoids, &out.assignment);
    out.points = linalg::select_rows(x, medoids);
    return out;
}

LandmarkSet agglomerative(const Matrix& x, Index r) {
    check_inputs(x, r, "agglomerative");
    const Index n = x.rows();
    Matrix dist = pairwise_euclidean(x);
    std::vector<Index> size(static_cast<std::size_t>(n), 1);
    std::vector<bool> active(static_cast<std::size_t>(n), true);

    struct Merge {
        Index a, b;
        double height;
    };
    std::vector<Merge> merges;
    merges.reserve(static_cast<std::size_t>(n));

    // Nearest-neighbour chain over average linkage (Lance-Williams updates).
    // Clusters are identified by their lowest surviving slot.
    std::vector<Index> chain;
    Index remaining = n;
    while (remaining > 1) {
        if (chain.empty()) {
            for (Index i = 0; i < n; ++i) {
                if (active[static_cast<std::size_t>(i)]) {
                    chain.push_back(i);
                    break;
                }
            }
        }
        const Index a = chain.back();
        const Index prev = chain.size() > 1 ? chain[chain.size() - 2] : -1;
        Index b = -1;
        double best = kInf;
        if (prev >= 0) {
            b = prev;
            best = dist(a, prev);
        }
        for (Index k = 0; k < n; ++k) {
            if (k == a || !active[static_cast<std::size_t>(k)]) continue;
            if (dist(a, k) < best) {
                best = dist(a, k);
                b = k;
            }
        }
        if (b != prev) {
            chain.push_back(b);
            continue;
        }
        chain.pop_back();
        chain.pop_back();
        const Index keep = std::min(a, b);
        const Index gone = std::max(a, b);
        merges.push_back({keep, gone, best});
        const double sk = static_cast<double>(size[static_cast<std::size_t>(keep)]);
        const double sg = static_cast<double>(size[static_cast<std::size_t>(gone)]);
        for (Index k = 0; k < n; ++k) {
            if (!active[static_cast<std::size_t>(k)] || k == keep || k == gone) continue;
            const double d = (sk * dist(k, keep) + sg * dist(k, gone)) / (sk + sg);
            dist(k, keep) = d;
            dist(keep, k) = d;
        }
        size[static_cast<std::size_t>(keep)] += size[static_cast<std::size_t>(gone)];
        active[static_cast<std::size_t>(gone)] = false;
        --remaining;
    }

    // Cut the dendrogram: apply the n - r lowest merges.
    std::stable_sort(merges.begin(), merges.end(),
                     [](const Merge& l, const Merge& rr) { return l.height < rr.height; });
    std::vector<Index> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), Index{0});
    auto find = [&](Index i) {
        while (parent[static_cast<std::size_t>(i)] != i) {
            parent[static_cast<std::size_t>(i)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(i)])];
            i = parent[static_cast<std::size_t>(i)];
        }
        return i;
    };
    for (Index m = 0; m < n - r; ++m) {
        const Index ra = find(merges[static_cast<std::size_t>(m)].a);
        const Index rb = find(merges[static_cast<std::size_t>(m)].b);
        if (ra != rb) parent[static_cast<std::size_t>(std::max(ra, rb))] = std::min(ra, rb);
    }

    LandmarkSet out;
    out.method = ClusterMethod::agglomerative;
    out.assignment.assign(static_cast<std::size_t>(n), -1);
    std::vector<int> label_of_root(static_cast<std::size_t>(n), -1);
    int next = 0;
    for (Index i = 0; i < n; ++i) {
        const Index root = find(i);
        auto& lbl = label_of_root[static_cast<std::size_t>(root)];
        if (lbl < 0) lbl = next++;
        out.assignment[static_cast<std::size_t>(i)] = lbl;
    }
    const auto members = members_of(out.assignment, next);
    out.points.resize(next, x.cols());
    for (int j = 0; j < next; ++j)
        out.points.row(j) = linalg::select_rows(x, members[static_cast<std::size_t>(j)]).colwise().mean();
    return out;
}

int default_k_neighbors(Index n) {
    return std::max(10, static_cast<int>(std::ceil(std::log2(static_cast<double>(std::max<Index>(n, 2))))));
}

namespace {

// Partition a connected point set (given by global indices) into `parts`
// groups with normalised-Laplacian spectral clustering.
std::vector<int> spectral_partition(const Matrix& adjacency, const std::vector<Index>& nodes, Index parts,
                                    std::uint64_t seed) {
    const Index m = static_cast<Index>(nodes.size());
    if (parts <= 1) return std::vector<int>(static_cast<std::size_t>(m), 0);
    Matrix a = linalg::select(adjacency, nodes, nodes);
    Vector deg = a.rowwise().sum();
    Vector inv_sqrt = deg.unaryExpr([](double d) { return d > 0.0 ? 1.0 / std::sqrt(d) : 0.0; });
    Matrix lap = Matrix::Identity(m, m) - inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
    lap = 0.5 * (lap + lap.transpose());
    const auto eig = linalg::sym_eig(lap);
    Matrix embed = eig.vectors.rightCols(parts);  // smallest eigenvalues
    for (Index i = 0; i < m; ++i) {
        const double norm = embed.row(i).norm();
        if (norm > 0.0) embed.row(i) /= norm;
    }
    return kmeans(embed, parts, seed).assignment;
}

}  // namespace

LandmarkSet spectral_knn(const Matrix& x, Index r, std::optional<int> k_neighbors, std::uint64_t seed) {
    check_inputs(x, r, "spectral_knn");
    const Index n = x.rows();
    const int k_req = k_neighbors.value_or(default_k_neighbors(n));
    if (k_req < 1) throw InputError("spectral_knn: k_neighbors must be >= 1");
    const Index k = std::min<Index>(k_req, n - 1);

    LandmarkSet out;
    out.method = ClusterMethod::spectral;
    out.seed = seed;

    // Symmetrised (OR) kNN connectivity graph.
    Matrix adjacency = Matrix::Zero(n, n);
    if (k > 0) {
        const Vector sq = x.rowwise().squaredNorm();
        Matrix d = -2.0 * x * x.transpose();
        d.colwise() += sq;
        d.rowwise() += sq.transpose();
        std::vector<Index> order(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) {
            std::iota(order.begin(), order.end(), Index{0});
            std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return d(i, a) < d(i, b); });
            Index taken = 0;
            for (Index j : order) {
                if (j == i) continue;
                adjacency(i, j) = 1.0;
                adjacency(j, i) = 1.0;
                if (++taken == k) break;
            }
        }
    }

    // Connected components, labelled in order of their lowest member.
    std::vector<int> component(static_cast<std::size_t>(n), -1);
    std::vector<std::vector<Index>> comps;
    for (Index s = 0; s < n; ++s) {
        if (component[static_cast<std::size_t>(s)] >= 0) continue;
        const int id = static_cast<int>(comps.size());
        comps.emplace_back();
        std::vector<Index> stack{s};
        component[static_cast<std::size_t>(s)] = id;
        while (!stack.empty()) {
            Index u = stack.back();
            stack.pop_back();
            comps.back().push_back(u);
            for (Index v = 0; v < n; ++v) {
                if (adjacency(u, v) != 0.0 && component[static_cast<std::size_t>(v)] < 0) {
                    component[static_cast<std::size_t>(v)] = id;
                    stack.push_back(v);
                }
            }
        }
        std::sort(comps.back().begin(), comps.back().end());
    }
    const Index c = static_cast<Index>(comps.size());

    out.assignment.assign(static_cast<std::size_t>(n), 0);
    int next_label = 0;
    if (r < c) {
        // More components than landmarks: group whole components by k-means
        // on their centroids.
        Matrix centroids(c, x.cols());
        for (Index j = 0; j < c; ++j)
            centroids.row(j) = linalg::select_rows(x, comps[static_cast<std::size_t>(j)]).colwise().mean();
        const auto grouping = kmeans(centroids, r, derive_seed(seed, "components")).assignment;
        for (Index j = 0; j < c; ++j)
            for (Index i : comps[static_cast<std::size_t>(j)])
                out.assignment[static_cast<std::size_t>(i)] = grouping[static_cast<std::size_t>(j)];
        next_label = static_cast<int>(r);
    } else {
        // One landmark per component, the rest spread by size (largest
        // remainder), never exceeding a component's member count.
        std::vector<Index> alloc(static_cast<std::size_t>(c), 1);
        Index spare = r - c;
        std::vector<double> remainder(static_cast<std::size_t>(c), 0.0);
        const double extra_total = static_cast<double>(spare);
        for (Index j = 0; j < c && spare > 0; ++j) {
            const auto sj = static_cast<std::size_t>(j);
            const double share = extra_total * static_cast<double>(comps[sj].size()) / static_cast<double>(n);
            const Index whole = std::min<Index>(static_cast<Index>(std::floor(share)),
                                                static_cast<Index>(comps[sj].size()) - 1);
            alloc[sj] += whole;
            remainder[sj] = share - std::floor(share);
        }
        spare = r - std::accumulate(alloc.begin(), alloc.end(), Index{0});
        while (spare > 0) {
            Index pick = -1;
            for (Index j = 0; j < c; ++j) {
                const auto sj = static_cast<std::size_t>(j);
                if (alloc[sj] >= static_cast<Index>(comps[sj].size())) continue;
                if (pick < 0 || remainder[sj] > remainder[static_cast<std::size_t>(pick)]) pick = j;
            }
            ++alloc[static_cast<std::size_t>(pick)];
            remainder[static_cast<std::size_t>(pick)] = -1.0;
            --spare;
        }
        for (Index j = 0; j < c; ++j) {
            const auto sj = static_cast<std::size_t>(j);
            const auto local = spectral_partition(adjacency, comps[sj], alloc[sj], derive_seed(seed, static_cast<std::uint64_t>(j)));
            for (std::size_t t = 0; t < comps[sj].size(); ++t)
                out.assignment[static_cast<std::size_t>(comps[sj][t])] = next_label + local[t];
            next_label += static_cast<int>(alloc[sj]);
        }
    }

    const auto members = members_of(out.assignment, next_label);
    out.points.resize(next_label, x.cols());
    for (int j = 0; j < next_label; ++j) {
        const auto& idx = members[static_cast<std::size_t>(j)];
        // k-means repairs empty clusters, so every partition has members.
        out.points.row(j) = linalg::select_rows(x, idx).colwise().mean();
    }
    return out;
}

LandmarkSet run_method(ClusterMethod method, const Matrix& x, Index r, std::uint64_t seed,
                       const ClusteringOptions& options) {
    switch (method) {
        case ClusterMethod::kmeans: return kmeans(x, r, seed, options.max_iterations);
        case ClusterMethod::kmedians: return kmedians(x, r, seed, options.max_iterations);
        case ClusterMethod::kmedoids: return kmedoids(x, r, seed, options.max_iterations);
        case ClusterMethod::agglomerative: return agglomerative(x, r);
        case ClusterMethod::spectral: return spectral_knn(x, r, options.k_neighbors, seed);
    }
    throw InputError("unknown clustering method");
}

std::vector<LandmarkSet> landmark_ensemble(const Matrix& x, Index r, std::uint64_t seed,
                                           const ClusteringOptions& options, int threads) {
    if (r < 1 || r > x.rows()) {
        throw InputError("landmark_ensemble: landmark count " + std::to_string(r) + " outside [1, " +
                         std::to_string(x.rows()) + "]");
    }
    std::vector<LandmarkSet> out;
    auto member = [&](ClusterMethod m) {
        auto set = run_method(m, x, r, derive_seed(seed, to_string(m)), options);
        set.seed = m == ClusterMethod::agglomerative ? 0 : derive_seed(seed, to_string(m));
        return set;
    };
    if (threads > 1) {
        std::vector<std::future<LandmarkSet>> futures;
        for (ClusterMethod m : kEnsembleMethods) futures.push_back(std::async(std::launch::async, member, m));
        for (auto& f : futures) out.push_back(f.get());
    } else {
        for (ClusterMethod m : kEnsembleMethods) out.push_back(member(m));
    }
    return out;
}

double quantization_error(const Matrix& x, const Matrix& landmarks) {
    std::vector<int> assignment;
    return assign(x, landmarks, Metric::sq_euclidean, assignment);
}

}  // namespace dkmo::clustering
