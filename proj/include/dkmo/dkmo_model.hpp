#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dkmo/kernels.hpp"
#include "dkmo/nn.hpp"
#include "dkmo/nystroem.hpp"
#include "dkmo/training.hpp"

// Single-kernel DKMO: one representation network per embedding, fused under
// kernel dropout and classified by a softmax head. Also hosts the Decomp and
// linear-softmax baselines.
namespace dkmo::model {

using linalg::Matrix;
using Index = Eigen::Index;
using nn::Mode;

enum class Merge { concat, sum, average };

std::string to_string(Merge m);
Merge merge_from_string(const std::string& s);

struct FusionConfig {
    Merge merge = Merge::sum;
    double kernel_dropout = 0.5;
};

struct BranchConfig {
    std::vector<Index> hidden{256, 512, 256, 128};
    double dropout = 0.5;
    bool batch_norm = true;
    double bn_momentum = 0.99;
};

struct DkmoConfig {
    BranchConfig branch;
    FusionConfig fusion;
    nn::TrainConfig train;
};

// One draw of the kernel-level dropout: each of `count` representations is
// kept independently with probability 1 - rate. `drawn` is the raw draw;
// when it keeps nothing one index is chosen uniformly and forced back in.
struct KernelMask {
    std::vector<bool> drawn;
    std::vector<Index> retained;
    bool forced = false;
};

KernelMask kernel_dropout_mask(Index count, double rate, Rng& rng);

// Per-sample masks as a (rows x count) 0/1 table. Eval mode keeps everything.
Matrix draw_keep_table(Index rows, Index count, double rate, Mode mode, Rng& rng);

Index fused_width(std::span<const Index> widths, Merge merge);

// Fuses per-representation outputs (each rows x w_p) under a keep table.
//   concat:  [h_1 .. h_P], dropped slots zero-filled (width fixed at sum w_p)
//   sum:     sum of kept h_p times P / |kept| in train mode
//   average: mean of kept h_p
// Eval mode uses every representation with no rescale.
Matrix fuse(std::span<const Matrix> outputs, const Matrix& keep, Merge merge, Mode mode);
std::vector<Matrix> fuse_backward(const Matrix& upstream, std::span<const Matrix> outputs, const Matrix& keep,
                                  Merge merge, Mode mode);

// Branch networks + fusion, without a classifier. Branch p reads ensemble
// member p.
class DkmoBody {
public:
    DkmoBody() = default;
    DkmoBody(std::span<const Index> input_widths, const BranchConfig& branch, const FusionConfig& fusion,
             std::uint64_t seed);
    DkmoBody(std::vector<nn::Network> branches, const FusionConfig& fusion);

    struct Cache {
        std::vector<nn::Network::Cache> branches;
        std::vector<Matrix> outputs;
        Matrix keep;
        Mode mode = Mode::eval;
    };

    Matrix forward(std::span<const Matrix> inputs, Mode mode, Rng& rng, Cache* cache = nullptr) const;
    // Gradients for each branch, in branch order.
    std::vector<nn::Network::Gradients> backward(const Cache& cache, const Matrix& upstream) const;
    void commit_batch_statistics(const Cache& cache);

    Index output_width() const;
    Index branch_count() const { return static_cast<Index>(branches_.size()); }
    const FusionConfig& fusion() const { return fusion_; }
    const std::vector<nn::Network>& branches() const { return branches_; }
    std::vector<nn::Network>& branches() { return branches_; }

private:
    std::vector<nn::Network> branches_;
    FusionConfig fusion_;
};

// Raw samples to embed out-of-sample: features for clustered members,
// kernel rows against all training samples for conventional members.
struct SampleInput {
    std::optional<Matrix> features;
    std::optional<Matrix> kernel_rows;
};

// Embeds raw samples with every member of the ensemble.
std::vector<Matrix> embed_samples(const nystroem::EmbeddingEnsemble& ensemble, const SampleInput& input);

class DkmoModel {
public:
    DkmoModel() = default;
    // Fresh (untrained) model bound to `ensemble`.
    DkmoModel(nystroem::EmbeddingEnsemble ensemble, int classes, const DkmoConfig& config, std::uint64_t seed);
    DkmoModel(nystroem::EmbeddingEnsemble ensemble, DkmoBody body, nn::Network head, int classes,
              std::string kernel_name);

    struct Cache {
        DkmoBody::Cache body;
        nn::Network::Cache head;
    };

    Matrix forward_logits(std::span<const Matrix> embedded, Mode mode, Rng& rng, Cache* cache = nullptr) const;
    std::vector<nn::Network::Gradients> backward(const Cache& cache, const Matrix& dlogits) const;

    // Eval-mode class probabilities; rows sum to 1.
    Matrix predict_proba(std::span<const Matrix> embedded) const;
    Matrix predict_proba_rows(std::span<const Index> training_rows) const;
    Matrix predict_proba(const SampleInput& input) const;

    std::vector<nn::Network*> networks();
    const DkmoBody& body() const { return body_; }
    DkmoBody& body() { return body_; }
    const nn::Network& head() const { return head_; }
    nn::Network& head() { return head_; }
    const nystroem::EmbeddingEnsemble& ensemble() const { return ensemble_; }
    int classes() const { return classes_; }
    const std::string& kernel_name() const { return kernel_name_; }

private:
    nystroem::EmbeddingEnsemble ensemble_;
    DkmoBody body_;
    nn::Network head_;
    int classes_ = 0;
    std::string kernel_name_;
};

// Finite-difference check of every branch and head parameter under softmax
// cross-entropy, train mode, with kernel and activation dropout frozen by
// reseeding with mask_seed.
nn::GradCheckReport grad_check(DkmoModel& model, std::span<const Matrix> embedded, std::span<const int> labels,
                               std::uint64_t mask_seed, const nn::GradCheckOptions& options = {});

// Adapter driving a DkmoModel through nn::fit over its ensemble rows.
class DkmoTrainer : public nn::Trainable {
public:
    explicit DkmoTrainer(DkmoModel& model) : model_(model) {}
    Matrix train_forward(std::span<const Index> rows, Rng& rng) override;
    std::vector<nn::Network::Gradients> train_backward(const Matrix& dlogits) override;
    std::vector<nn::Network*> networks() override { return model_.networks(); }
    Matrix eval_logits(std::span<const Index> rows) const override;

private:
    DkmoModel& model_;
    DkmoModel::Cache cache_;
};

struct DkmoTrainResult {
    DkmoModel model;
    nn::TrainLog log;
};

// labels[i] belongs to ensemble row i; needs at least two classes.
DkmoTrainResult dkmo_train(const nystroem::EmbeddingEnsemble& ensemble, std::span<const int> labels,
                           const DkmoConfig& config, std::uint64_t seed);

int class_count(std::span<const int> labels);

// Where a kernel comes from, restricted to the training samples.
struct KernelSource {
    std::string name;
    std::optional<kernels::KernelMatrix> kernel;  // n_train x n_train
    std::optional<Matrix> features;               // n_train x d
    kernels::KernelFunction function;             // used with features
};

struct EmbeddingPlan {
    enum class Kind { automatic, clustered, conventional };
    Kind kind = Kind::automatic;
    Index rank = 20;              // clustered landmarks
    nystroem::Schedule schedule;  // conventional; empty means default_schedule(n)
    clustering::ClusteringOptions clustering;
};

// Clustered ensemble for feature sources, varied conventional ensemble for
// kernel sources (automatic), or as forced by the plan.
nystroem::EmbeddingEnsemble build_ensemble(const KernelSource& source, const EmbeddingPlan& plan, std::uint64_t seed,
                                           int threads = 1);

// Truncated-SVD features U_r S_r^{1/2} of a kernel, plus the map
// U_r S_r^{-1/2} that embeds new kernel rows consistently.
struct DecompFeatures {
    Matrix features;  // n x r
    Matrix map;       // n x r
};

DecompFeatures decomp_features(const kernels::KernelMatrix& k, Index r);

// Multinomial logistic regression (one dense layer, softmax loss) trained
// through nn::fit.
struct LinearClassifier {
    nn::Network network;
    nn::TrainLog log;
    double train_accuracy = 0.0;

    Matrix predict_proba(const Matrix& features) const;
};

LinearClassifier softmax_baseline(const Matrix& features, std::span<const int> labels, const nn::TrainConfig& config,
                                  std::uint64_t seed);

}  // namespace dkmo::model
