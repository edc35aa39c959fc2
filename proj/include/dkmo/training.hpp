#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dkmo/nn.hpp"

// Mini-batch training loop shared by every model: shuffled epochs, Adam,
// early stopping on validation loss with best-weight restore.
namespace dkmo::nn {

struct TrainConfig {
    int epochs = 200;
    Index batch_size = 64;
    AdamConfig adam;
    int patience = 20;          // epochs without validation-loss improvement; 0 disables
    double val_fraction = 0.1;  // stratified holdout of the training rows
};

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_loss = std::numeric_limits<double>::quiet_NaN();
    double val_accuracy = std::numeric_limits<double>::quiet_NaN();
};

struct TrainLog {
    std::vector<EpochLog> epochs;
    int best_epoch = -1;  // restored epoch (1-based), -1 when no validation set
    bool stopped_early = false;
};

// A model the trainer can drive. Rows index whatever data the model is bound
// to; logits are (rows x classes).
class Trainable {
public:
    virtual ~Trainable() = default;

    // Training-mode logits; the model keeps what train_backward needs.
    virtual Matrix train_forward(std::span<const Index> rows, Rng& rng) = 0;
    // Gradients for networks(), in order, from d loss / d logits of the last
    // train_forward. Also commits batch-norm statistics.
    virtual std::vector<Network::Gradients> train_backward(const Matrix& dlogits) = 0;
    virtual std::vector<Network*> networks() = 0;
    virtual Matrix eval_logits(std::span<const Index> rows) const = 0;
};

// Stratified holdout: returns (fit rows, validation rows), each sorted.
std::pair<std::vector<Index>, std::vector<Index>> holdout_split(std::span<const Index> rows,
                                                                std::span<const int> labels, double fraction,
                                                                std::uint64_t seed);

// Trains on `rows` (labels indexed by row). A validation subset is held out
// per config.val_fraction unless explicit validation rows are given.
// Throws DivergenceError on a non-finite loss.
TrainLog fit(Trainable& model, std::span<const int> labels, std::span<const Index> rows, const TrainConfig& config,
             std::uint64_t seed, std::span<const Index> validation_rows = {});

double accuracy(const Matrix& logits, std::span<const int> labels);
std::vector<int> argmax_rows(const Matrix& m);

void write_log_csv(const std::string& path, const TrainLog& log);

}  // namespace dkmo::nn
