#include "dkmo/dkmo_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "dkmo/error.hpp"

namespace dkmo::model {

std::string to_string(Merge m) {
    switch (m) {
        case Merge::concat: return "concat";
        case Merge::sum: return "sum";
        case Merge::average: return "average";
    }
    return "?";
}

Merge merge_from_string(const std::string& s) {
    if (s == "concat") return Merge::concat;
    if (s == "sum") return Merge::sum;
    if (s == "average") return Merge::average;
    throw ConfigError("unknown merge strategy '" + s + "'");
}

KernelMask kernel_dropout_mask(Index count, double rate, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) throw InputError("kernel dropout rate must lie in [0, 1)");
    KernelMask mask;
    mask.drawn.resize(static_cast<std::size_t>(count));
    for (Index p = 0; p < count; ++p) {
        const bool keep = rng.bernoulli(1.0 - rate);
        mask.drawn[static_cast<std::size_t>(p)] = keep;
        if (keep) mask.retained.push_back(p);
    }
    if (mask.retained.empty() && count > 0) {
        mask.retained.push_back(static_cast<Index>(rng.index(static_cast<std::size_t>(count))));
        mask.forced = true;
    }
    return mask;
}

Matrix draw_keep_table(Index rows, Index count, double rate, Mode mode, Rng& rng) {
    Matrix keep = Matrix::Ones(rows, count);
    if (mode == Mode::eval || rate == 0.0) return keep;
    keep.setZero();
    for (Index i = 0; i < rows; ++i)
        for (Index p : kernel_dropout_mask(count, rate, rng).retained) keep(i, p) = 1.0;
    return keep;
}

Index fused_width(std::span<const Index> widths, Merge merge) {
    if (widths.empty()) throw InputError("fusion needs at least one representation");
    if (merge == Merge::concat) return std::accumulate(widths.begin(), widths.end(), Index{0});
    for (Index w : widths) {
        if (w != widths.front()) {
            throw ConfigError(to_string(merge) + " merging needs equal representation widths");
        }
    }
    return widths.front();
}

namespace {

// Per-row multiplier applied to each kept representation.
linalg::Vector row_scale(const Matrix& keep, Merge merge, Mode mode) {
    const linalg::Vector kept = keep.rowwise().sum();
    const auto p = static_cast<double>(keep.cols());
    linalg::Vector scale(keep.rows());
    for (Index i = 0; i < keep.rows(); ++i) {
        if (!(kept(i) > 0.0)) throw InputError("fusion: a sample has no retained representation");
        switch (merge) {
            case Merge::concat: scale(i) = 1.0; break;
            case Merge::sum: scale(i) = mode == Mode::train ? p / kept(i) : 1.0; break;
            case Merge::average: scale(i) = 1.0 / kept(i); break;
        }
    }
    return scale;
}

}  // namespace

Matrix fuse(std::span<const Matrix> outputs, const Matrix& keep, Merge merge, Mode mode) {
    std::vector<Index> widths;
    for (const auto& o : outputs) widths.push_back(o.cols());
    const Index width = fused_width(widths, merge);
    const Index rows = outputs.front().rows();
    if (keep.rows() != rows || keep.cols() != static_cast<Index>(outputs.size())) {
        throw ShapeError("fusion: keep table does not match the representations");
    }
    const linalg::Vector scale = row_scale(keep, merge, mode);
    Matrix fused = Matrix::Zero(rows, width);
    Index offset = 0;
    for (std::size_t p = 0; p < outputs.size(); ++p) {
        const linalg::Vector factor = keep.col(static_cast<Index>(p)).cwiseProduct(scale);
        if (merge == Merge::concat) {
            fused.middleCols(offset, widths[p]) = factor.asDiagonal() * outputs[p];
            offset += widths[p];
        } else {
            fused += factor.asDiagonal() * outputs[p];
        }
    }
    return fused;
}

std::vector<Matrix> fuse_backward(const Matrix& upstream, std::span<const Matrix> outputs, const Matrix& keep,
                                  Merge merge, Mode mode) {
    const linalg::Vector scale = row_scale(keep, merge, mode);
    std::vector<Matrix> grads;
    Index offset = 0;
    for (std::size_t p = 0; p < outputs.size(); ++p) {
        const linalg::Vector factor = keep.col(static_cast<Index>(p)).cwiseProduct(scale);
        if (merge == Merge::concat) {
            grads.push_back(factor.asDiagonal() * upstream.middleCols(offset, outputs[p].cols()));
            offset += outputs[p].cols();
        } else {
            grads.push_back(factor.asDiagonal() * upstream);
        }
    }
    return grads;
}

DkmoBody::DkmoBody(std::span<const Index> input_widths, const BranchConfig& branch, const FusionConfig& fusion,
                   std::uint64_t seed)
    : fusion_(fusion) {
    if (input_widths.empty()) throw InputError("DKMO body needs at least one branch");
    if (branch.hidden.empty()) throw ConfigError("branch networks need at least one hidden layer");
    if (!(fusion.kernel_dropout >= 0.0 && fusion.kernel_dropout < 1.0)) {
        throw ConfigError("kernel dropout rate must lie in [0, 1)");
    }
    const auto specs = nn::hidden_blocks(branch.hidden, branch.dropout, branch.batch_norm);
    for (std::size_t p = 0; p < input_widths.size(); ++p) {
        branches_.emplace_back(input_widths[p], specs, derive_seed(seed, static_cast<std::uint64_t>(p)),
                               branch.bn_momentum);
    }
    output_width();
}

DkmoBody::DkmoBody(std::vector<nn::Network> branches, const FusionConfig& fusion)
    : branches_(std::move(branches)), fusion_(fusion) {
    if (branches_.empty()) throw InputError("DKMO body needs at least one branch");
    output_width();
}

Index DkmoBody::output_width() const {
    std::vector<Index> widths;
    for (const auto& b : branches_) widths.push_back(b.output_width());
    return fused_width(widths, fusion_.merge);
}

Matrix DkmoBody::forward(std::span<const Matrix> inputs, Mode mode, Rng& rng, Cache* cache) const {
    if (inputs.size() != branches_.size()) {
        throw BindingError("DKMO body has " + std::to_string(branches_.size()) + " branches but received " +
                           std::to_string(inputs.size()) + " embeddings");
    }
    const Index rows = inputs.front().rows();
    Matrix keep = draw_keep_table(rows, branch_count(), fusion_.kernel_dropout, mode, rng);
    std::vector<Matrix> outputs;
    outputs.reserve(branches_.size());
    if (cache) {
        cache->branches.assign(branches_.size(), {});
        cache->mode = mode;
    }
    for (std::size_t p = 0; p < branches_.size(); ++p) {
        if (inputs[p].rows() != rows) throw ShapeError("DKMO body: embeddings disagree on row count");
        outputs.push_back(branches_[p].forward(inputs[p], mode, rng, cache ? &cache->branches[p] : nullptr));
    }
    Matrix fused = fuse(outputs, keep, fusion_.merge, mode);
    if (cache) {
        cache->outputs = std::move(outputs);
        cache->keep = std::move(keep);
    }
    return fused;
}

std::vector<nn::Network::Gradients> DkmoBody::backward(const Cache& cache, const Matrix& upstream) const {
    const auto per_branch = fuse_backward(upstream, cache.outputs, cache.keep, fusion_.merge, cache.mode);
    std::vector<nn::Network::Gradients> grads;
    grads.reserve(branches_.size());
    for (std::size_t p = 0; p < branches_.size(); ++p) grads.push_back(branches_[p].backward(cache.branches[p], per_branch[p]));
    return grads;
}

void DkmoBody::commit_batch_statistics(const Cache& cache) {
    for (std::size_t p = 0; p < branches_.size(); ++p) branches_[p].commit_batch_statistics(cache.branches[p]);
}

std::vector<Matrix> embed_samples(const nystroem::EmbeddingEnsemble& ensemble, const SampleInput& input) {
    std::vector<Matrix> out;
    for (const auto& member : ensemble.members) {
        if (member.is_conventional()) {
            if (!input.kernel_rows) {
                throw BindingError("kernel '" + member.kernel_name + "' needs kernel rows against the training samples");
            }
            out.push_back(member.embed_kernel_rows(*input.kernel_rows));
        } else {
            if (!input.features) throw BindingError("kernel '" + member.kernel_name + "' needs feature rows");
            out.push_back(member.embed_features(*input.features));
        }
    }
    return out;
}

int class_count(std::span<const int> labels) {
    if (labels.empty()) return 0;
    return *std::max_element(labels.begin(), labels.end()) + 1;
}

DkmoModel::DkmoModel(nystroem::EmbeddingEnsemble ensemble, int classes, const DkmoConfig& config, std::uint64_t seed)
    : ensemble_(std::move(ensemble)), classes_(classes) {
    ensemble_.check();
    if (classes < 2) throw InputError("DKMO needs at least two classes");
    kernel_name_ = ensemble_.members.front().kernel_name;
    body_ = DkmoBody(ensemble_.widths(), config.branch, config.fusion, derive_seed(seed, "branches"));
    head_ = nn::Network(body_.output_width(), {nn::LayerSpec::dense(classes)}, derive_seed(seed, "head"));
}

DkmoModel::DkmoModel(nystroem::EmbeddingEnsemble ensemble, DkmoBody body, nn::Network head, int classes,
                     std::string kernel_name)
    : ensemble_(std::move(ensemble)), body_(std::move(body)), head_(std::move(head)), classes_(classes),
      kernel_name_(std::move(kernel_name)) {
    if (head_.input_width() != body_.output_width() || head_.output_width() != classes_) {
        throw ShapeError("DKMO head does not match body width / class count");
    }
    if (!ensemble_.members.empty() && ensemble_.size() != body_.branch_count()) {
        throw BindingError("DKMO ensemble size does not match branch count");
    }
}

Matrix DkmoModel::forward_logits(std::span<const Matrix> embedded, Mode mode, Rng& rng, Cache* cache) const {
    const Matrix fused = body_.forward(embedded, mode, rng, cache ? &cache->body : nullptr);
    return head_.forward(fused, mode, rng, cache ? &cache->head : nullptr);
}

std::vector<nn::Network::Gradients> DkmoModel::backward(const Cache& cache, const Matrix& dlogits) const {
    auto head_grads = head_.backward(cache.head, dlogits);
    auto grads = body_.backward(cache.body, head_grads.input);
    grads.push_back(std::move(head_grads));
    return grads;
}

Matrix DkmoModel::predict_proba(std::span<const Matrix> embedded) const {
    Rng unused(0);
    return nn::softmax(forward_logits(embedded, Mode::eval, unused));
}

Matrix DkmoModel::predict_proba_rows(std::span<const Index> training_rows) const {
    return predict_proba(ensemble_.gather(training_rows));
}

Matrix DkmoModel::predict_proba(const SampleInput& input) const {
    return predict_proba(embed_samples(ensemble_, input));
}

std::vector<nn::Network*> DkmoModel::networks() {
    std::vector<nn::Network*> out;
    for (auto& b : body_.branches()) out.push_back(&b);
    out.push_back(&head_);
    return out;
}

nn::GradCheckReport grad_check(DkmoModel& model, std::span<const Matrix> embedded, std::span<const int> labels,
                               std::uint64_t mask_seed, const nn::GradCheckOptions& options) {
    Rng rng(mask_seed);
    DkmoModel::Cache cache;
    const Matrix logits = model.forward_logits(embedded, Mode::train, rng, &cache);
    const auto grads = model.backward(cache, nn::softmax_cross_entropy(logits, labels).gradient);
    std::vector<Matrix*> params;
    std::vector<Matrix> analytic;
    const auto nets = model.networks();
    for (std::size_t i = 0; i < nets.size(); ++i) {
        const auto p = nets[i]->parameters();
        params.insert(params.end(), p.begin(), p.end());
        analytic.insert(analytic.end(), grads[i].params.begin(), grads[i].params.end());
    }
    auto objective = [&] {
        Rng frozen(mask_seed);
        return nn::softmax_cross_entropy(model.forward_logits(embedded, Mode::train, frozen), labels).loss;
    };
    return nn::compare_gradients(objective, params, analytic, options);
}

Matrix DkmoTrainer::train_forward(std::span<const Index> rows, Rng& rng) {
    return model_.forward_logits(model_.ensemble().gather(rows), Mode::train, rng, &cache_);
}

std::vector<nn::Network::Gradients> DkmoTrainer::train_backward(const Matrix& dlogits) {
    auto grads = model_.backward(cache_, dlogits);
    model_.body().commit_batch_statistics(cache_.body);
    model_.head().commit_batch_statistics(cache_.head);
    return grads;
}

Matrix DkmoTrainer::eval_logits(std::span<const Index> rows) const {
    Rng unused(0);
    return model_.forward_logits(model_.ensemble().gather(rows), Mode::eval, unused);
}

DkmoTrainResult dkmo_train(const nystroem::EmbeddingEnsemble& ensemble, std::span<const int> labels,
                           const DkmoConfig& config, std::uint64_t seed) {
    ensemble.check();
    if (static_cast<Index>(labels.size()) != ensemble.samples()) {
        throw ShapeError("dkmo_train: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(ensemble.samples()) + " embedded samples");
    }
    const int classes = class_count(labels);
    DkmoTrainResult result{DkmoModel(ensemble, classes, config, derive_seed(seed, "init")), {}};
    std::vector<Index> rows(labels.size());
    std::iota(rows.begin(), rows.end(), Index{0});
    DkmoTrainer trainer(result.model);
    result.log = nn::fit(trainer, labels, rows, config.train, derive_seed(seed, "fit"));
    return result;
}

nystroem::EmbeddingEnsemble build_ensemble(const KernelSource& source, const EmbeddingPlan& plan, std::uint64_t seed,
                                           int threads) {
    using Kind = EmbeddingPlan::Kind;
    Kind kind = plan.kind;
    if (kind == Kind::automatic) kind = source.features ? Kind::clustered : Kind::conventional;
    if (kind == Kind::clustered) {
        if (!source.features) throw ConfigError("kernel '" + source.name + "': clustered embeddings need features");
        return nystroem::clustered_ensemble(*source.features, plan.rank, source.function, seed, plan.clustering,
                                            source.name, threads);
    }
    kernels::KernelMatrix k = source.kernel ? *source.kernel
                                            : kernels::kernel_from_features(*source.features, source.function, source.name);
    if (k.name().empty()) k = k.renamed(source.name);
    const auto schedule = plan.schedule.empty() ? nystroem::default_schedule(k.size()) : plan.schedule;
    return nystroem::varied_ensemble(k, schedule, seed);
}

DecompFeatures decomp_features(const kernels::KernelMatrix& k, Index r) {
    const auto svd = linalg::truncated_svd(k.values(), r);
    DecompFeatures out;
    const linalg::Vector root = svd.s.cwiseSqrt();
    out.features = svd.u * root.asDiagonal();
    const double floor = svd.s.size() > 0 ? std::sqrt(1e-10 * svd.s.maxCoeff()) : 0.0;
    const linalg::Vector inv_root = root.unaryExpr([floor](double v) { return v > floor ? 1.0 / v : 0.0; });
    out.map = svd.u * inv_root.asDiagonal();
    return out;
}

namespace {

class NetworkTrainer : public nn::Trainable {
public:
    NetworkTrainer(nn::Network& net, const Matrix& features) : net_(net), features_(features) {}
    Matrix train_forward(std::span<const Index> rows, Rng& rng) override {
        return net_.forward(linalg::select_rows(features_, rows), Mode::train, rng, &cache_);
    }
    std::vector<nn::Network::Gradients> train_backward(const Matrix& dlogits) override {
        auto g = net_.backward(cache_, dlogits);
        net_.commit_batch_statistics(cache_);
        return {std::move(g)};
    }
    std::vector<nn::Network*> networks() override { return {&net_}; }
    Matrix eval_logits(std::span<const Index> rows) const override {
        return net_.forward_eval(linalg::select_rows(features_, rows));
    }

private:
    nn::Network& net_;
    const Matrix& features_;
    nn::Network::Cache cache_;
};

}  // namespace

Matrix LinearClassifier::predict_proba(const Matrix& features) const {
    return nn::softmax(network.forward_eval(features));
}

LinearClassifier softmax_baseline(const Matrix& features, std::span<const int> labels, const nn::TrainConfig& config,
                                  std::uint64_t seed) {
    if (features.rows() != static_cast<Index>(labels.size())) {
        throw ShapeError("softmax_baseline: feature rows do not match label count");
    }
    const int classes = class_count(labels);
    if (classes < 2) throw InputError("softmax_baseline needs at least two classes");
    LinearClassifier out{nn::Network(features.cols(), {nn::LayerSpec::dense(classes)}, derive_seed(seed, "init")), {}, 0.0};
    std::vector<Index> rows(labels.size());
    std::iota(rows.begin(), rows.end(), Index{0});
    NetworkTrainer trainer(out.network, features);
    out.log = nn::fit(trainer, labels, rows, config, derive_seed(seed, "fit"));
    out.train_accuracy = nn::accuracy(out.network.forward_eval(features), labels);
    return out;
}

}  // namespace dkmo::model
