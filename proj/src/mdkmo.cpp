#include "dkmo/mdkmo.hpp"

#include <future>
#include <numeric>

#include "dkmo/error.hpp"

namespace dkmo::model {

MdkmoModel::MdkmoModel(std::vector<DkmoBody> bodies, std::vector<nystroem::EmbeddingEnsemble> ensembles,
                       std::vector<std::string> kernel_names, GlobalFusionConfig fusion, nn::Network post,
                       nn::Network head, int classes)
    : bodies_(std::move(bodies)), ensembles_(std::move(ensembles)), kernel_names_(std::move(kernel_names)),
      fusion_(std::move(fusion)), post_(std::move(post)), head_(std::move(head)), classes_(classes) {
    if (bodies_.size() < 2) throw ConfigError("M-DKMO needs at least two kernels");
    if (ensembles_.size() != bodies_.size() || kernel_names_.size() != bodies_.size()) {
        throw ShapeError("M-DKMO: bodies, ensembles and names disagree in count");
    }
    std::vector<Index> widths;
    for (const auto& b : bodies_) widths.push_back(b.output_width());
    const Index merged = fused_width(widths, fusion_.merge);
    if (post_.input_width() != merged || head_.input_width() != post_.output_width() || head_.output_width() != classes_) {
        throw ShapeError("M-DKMO: global layers do not match the merged width");
    }
}

Matrix MdkmoModel::forward_logits(std::span<const std::vector<Matrix>> embedded, Mode mode, Rng& rng,
                                  Cache* cache) const {
    if (embedded.size() != bodies_.size()) {
        throw BindingError("M-DKMO has " + std::to_string(bodies_.size()) + " kernels but received inputs for " +
                           std::to_string(embedded.size()));
    }
    if (cache) {
        cache->bodies.assign(bodies_.size(), {});
        cache->mode = mode;
    }
    const Index rows = embedded.front().front().rows();
    Matrix keep = draw_keep_table(rows, kernel_count(), fusion_.kernel_dropout, mode, rng);
    std::vector<Matrix> reps;
    for (std::size_t m = 0; m < bodies_.size(); ++m)
        reps.push_back(bodies_[m].forward(embedded[m], mode, rng, cache ? &cache->bodies[m] : nullptr));
    const Matrix merged = fuse(reps, keep, fusion_.merge, mode);
    const Matrix hidden = post_.forward(merged, mode, rng, cache ? &cache->post : nullptr);
    Matrix logits = head_.forward(hidden, mode, rng, cache ? &cache->head : nullptr);
    if (cache) {
        cache->reps = std::move(reps);
        cache->keep = std::move(keep);
    }
    return logits;
}

std::vector<nn::Network::Gradients> MdkmoModel::backward(const Cache& cache, const Matrix& dlogits) const {
    auto head_grads = head_.backward(cache.head, dlogits);
    auto post_grads = post_.backward(cache.post, head_grads.input);
    const auto per_kernel = fuse_backward(post_grads.input, cache.reps, cache.keep, fusion_.merge, cache.mode);
    std::vector<nn::Network::Gradients> grads;
    for (std::size_t m = 0; m < bodies_.size(); ++m) {
        auto body_grads = bodies_[m].backward(cache.bodies[m], per_kernel[m]);
        for (auto& g : body_grads) grads.push_back(std::move(g));
    }
    grads.push_back(std::move(post_grads));
    grads.push_back(std::move(head_grads));
    return grads;
}

void MdkmoModel::commit_batch_statistics(const Cache& cache) {
    for (std::size_t m = 0; m < bodies_.size(); ++m) bodies_[m].commit_batch_statistics(cache.bodies[m]);
    post_.commit_batch_statistics(cache.post);
    head_.commit_batch_statistics(cache.head);
}

std::vector<nn::Network*> MdkmoModel::networks() {
    std::vector<nn::Network*> out;
    for (auto& body : bodies_)
        for (auto& b : body.branches()) out.push_back(&b);
    out.push_back(&post_);
    out.push_back(&head_);
    return out;
}

std::vector<std::vector<Matrix>> MdkmoModel::gather(std::span<const Index> rows) const {
    std::vector<std::vector<Matrix>> out;
    for (const auto& e : ensembles_) out.push_back(e.gather(rows));
    return out;
}

Matrix MdkmoModel::predict_proba(std::span<const std::vector<Matrix>> embedded) const {
    Rng unused(0);
    return nn::softmax(forward_logits(embedded, Mode::eval, unused));
}

Matrix MdkmoModel::predict_proba_rows(std::span<const Index> training_rows) const {
    return predict_proba(gather(training_rows));
}

Matrix MdkmoModel::predict_proba(std::span<const SampleInput> inputs) const {
    if (inputs.size() != bodies_.size()) {
        throw BindingError("M-DKMO needs inputs for " + std::to_string(bodies_.size()) + " kernels, got " +
                           std::to_string(inputs.size()));
    }
    std::vector<std::vector<Matrix>> embedded;
    for (std::size_t m = 0; m < bodies_.size(); ++m) embedded.push_back(embed_samples(ensembles_[m], inputs[m]));
    return predict_proba(embedded);
}

namespace {

KernelSource normalized(const KernelSource& source) {
    KernelSource out = source;
    if (out.kernel) out.kernel = kernels::normalize_kernel(*out.kernel).renamed(source.name);
    out.function.normalized = true;
    return out;
}

}  // namespace

std::vector<DkmoTrainResult> pretrain_all(const std::vector<KernelSource>& sources, std::span<const int> labels,
                                          const EmbeddingPlan& plan, const DkmoConfig& config, std::uint64_t seed,
                                          int threads) {
    if (sources.empty()) throw InputError("pretrain_all: no kernels");
    auto train_one = [&](const KernelSource& raw) {
        const std::uint64_t kseed = derive_seed(seed, raw.name);
        const KernelSource source = normalized(raw);
        try {
            const auto ensemble = build_ensemble(source, plan, derive_seed(kseed, "embedding"));
            return dkmo_train(ensemble, labels, config, derive_seed(kseed, "train"));
        } catch (const DivergenceError& e) {
            throw DivergenceError("pretraining of kernel '" + raw.name + "' failed: " + e.what());
        }
    };
    std::vector<DkmoTrainResult> out;
    if (threads > 1) {
        std::vector<std::future<DkmoTrainResult>> futures;
        for (const auto& s : sources) futures.push_back(std::async(std::launch::async, train_one, std::cref(s)));
        for (auto& f : futures) out.push_back(f.get());
    } else {
        for (const auto& s : sources) out.push_back(train_one(s));
    }
    return out;
}

MdkmoModel build_mdkmo(std::span<const DkmoModel> pretrained, const GlobalFusionConfig& config, std::uint64_t seed) {
    if (pretrained.size() < 2) throw ConfigError("M-DKMO needs at least two pretrained kernels");
    if (!(config.kernel_dropout >= 0.0 && config.kernel_dropout < 1.0)) {
        throw ConfigError("global kernel dropout rate must lie in [0, 1)");
    }
    const int classes = pretrained.front().classes();
    std::vector<DkmoBody> bodies;
    std::vector<nystroem::EmbeddingEnsemble> ensembles;
    std::vector<std::string> names;
    std::vector<Index> widths;
    for (const auto& m : pretrained) {
        if (m.classes() != classes) throw ConfigError("pretrained kernels disagree on the class count");
        bodies.push_back(m.body());
        ensembles.push_back(m.ensemble());
        names.push_back(m.kernel_name());
        widths.push_back(m.body().output_width());
    }
    const Index merged = fused_width(widths, config.merge);
    nn::Network post(merged, nn::hidden_blocks(config.hidden, config.dropout), derive_seed(seed, "global-post"));
    nn::Network head(post.output_width(), {nn::LayerSpec::dense(classes)}, derive_seed(seed, "global-head"));
    return MdkmoModel(std::move(bodies), std::move(ensembles), std::move(names), config, std::move(post),
                      std::move(head), classes);
}

Matrix MdkmoTrainer::train_forward(std::span<const Index> rows, Rng& rng) {
    return model_.forward_logits(model_.gather(rows), Mode::train, rng, &cache_);
}

std::vector<nn::Network::Gradients> MdkmoTrainer::train_backward(const Matrix& dlogits) {
    auto grads = model_.backward(cache_, dlogits);
    model_.commit_batch_statistics(cache_);
    return grads;
}

Matrix MdkmoTrainer::eval_logits(std::span<const Index> rows) const {
    Rng unused(0);
    return model_.forward_logits(model_.gather(rows), Mode::eval, unused);
}

nn::TrainLog finetune(MdkmoModel& model, std::span<const int> labels, const nn::TrainConfig& config,
                      std::uint64_t seed) {
    const Index n = model.ensembles().front().samples();
    if (static_cast<Index>(labels.size()) != n) throw ShapeError("finetune: label count does not match the samples");
    if (config.epochs <= 0) return {};
    std::vector<Index> rows(static_cast<std::size_t>(n));
    std::iota(rows.begin(), rows.end(), Index{0});
    MdkmoTrainer trainer(model);
    return nn::fit(trainer, labels, rows, config, derive_seed(seed, "finetune"));
}

}  // namespace dkmo::model
