#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dkmo/dkmo_model.hpp"

// Multiple-kernel DKMO: per-kernel DKMO bodies (pretrained, heads removed)
// joined by a global kernel-dropout fusion layer and fine-tuned end to end.
namespace dkmo::model {

struct GlobalFusionConfig {
    Merge merge = Merge::sum;
    double kernel_dropout = 0.5;
    std::vector<Index> hidden;  // optional dense blocks after the merge
    double dropout = 0.5;       // activation dropout inside those blocks
};

class MdkmoModel {
public:
    MdkmoModel() = default;
    MdkmoModel(std::vector<DkmoBody> bodies, std::vector<nystroem::EmbeddingEnsemble> ensembles,
               std::vector<std::string> kernel_names, GlobalFusionConfig fusion, nn::Network post, nn::Network head,
               int classes);

    struct Cache {
        std::vector<DkmoBody::Cache> bodies;
        std::vector<Matrix> reps;
        Matrix keep;
        nn::Network::Cache post;
        nn::Network::Cache head;
        Mode mode = Mode::eval;
    };

    // embedded[m] holds the ensemble inputs of kernel m.
    Matrix forward_logits(std::span<const std::vector<Matrix>> embedded, Mode mode, Rng& rng,
                          Cache* cache = nullptr) const;
    std::vector<nn::Network::Gradients> backward(const Cache& cache, const Matrix& dlogits) const;
    void commit_batch_statistics(const Cache& cache);

    Matrix predict_proba(std::span<const std::vector<Matrix>> embedded) const;
    Matrix predict_proba_rows(std::span<const Index> training_rows) const;
    // inputs[m] feeds kernel m. Throws BindingError on a count mismatch.
    Matrix predict_proba(std::span<const SampleInput> inputs) const;

    std::vector<std::vector<Matrix>> gather(std::span<const Index> rows) const;
    std::vector<nn::Network*> networks();

    Index kernel_count() const { return static_cast<Index>(bodies_.size()); }
    int classes() const { return classes_; }
    const std::vector<DkmoBody>& bodies() const { return bodies_; }
    const std::vector<nystroem::EmbeddingEnsemble>& ensembles() const { return ensembles_; }
    const std::vector<std::string>& kernel_names() const { return kernel_names_; }
    const GlobalFusionConfig& fusion() const { return fusion_; }
    const nn::Network& post() const { return post_; }
    const nn::Network& head() const { return head_; }

private:
    std::vector<DkmoBody> bodies_;
    std::vector<nystroem::EmbeddingEnsemble> ensembles_;
    std::vector<std::string> kernel_names_;
    GlobalFusionConfig fusion_;
    nn::Network post_;  // zero layers when no post-merge widths are configured
    nn::Network head_;
    int classes_ = 0;
};

// Per-kernel DKMO training. Kernel sources are normalised to unit diagonal
// first; each kernel's seed is derived from (seed, kernel name) so results do
// not depend on list order. threads > 1 trains kernels concurrently.
std::vector<DkmoTrainResult> pretrain_all(const std::vector<KernelSource>& sources, std::span<const int> labels,
                                          const EmbeddingPlan& plan, const DkmoConfig& config, std::uint64_t seed,
                                          int threads = 1);

// Strips the softmax heads and adds a fresh global head. Needs M >= 2 and,
// for sum/average merging, equal body widths.
MdkmoModel build_mdkmo(std::span<const DkmoModel> pretrained, const GlobalFusionConfig& config, std::uint64_t seed);

class MdkmoTrainer : public nn::Trainable {
public:
    explicit MdkmoTrainer(MdkmoModel& model) : model_(model) {}
    Matrix train_forward(std::span<const Index> rows, Rng& rng) override;
    std::vector<nn::Network::Gradients> train_backward(const Matrix& dlogits) override;
    std::vector<nn::Network*> networks() override { return model_.networks(); }
    Matrix eval_logits(std::span<const Index> rows) const override;

private:
    MdkmoModel& model_;
    MdkmoModel::Cache cache_;
};

// End-to-end fine-tuning of every parameter (embedding maps stay frozen).
nn::TrainLog finetune(MdkmoModel& model, std::span<const int> labels, const nn::TrainConfig& config,
                      std::uint64_t seed);

}  // namespace dkmo::model
