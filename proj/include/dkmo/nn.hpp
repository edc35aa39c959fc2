#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dkmo/linalg.hpp"
#include "dkmo/random.hpp"

// Feed-forward network substrate: dense, batch-norm, ReLU, inverted dropout
// and softmax layers over row-major batches (one sample per row).
namespace dkmo::nn {

using linalg::Matrix;
using Index = Eigen::Index;

enum class LayerKind { dense, batch_norm, relu, dropout, softmax };
enum class Mode { train, eval };

std::string to_string(LayerKind kind);

struct LayerSpec {
    LayerKind kind = LayerKind::dense;
    Index width = 0;    // dense only
    double rate = 0.0;  // dropout only

    static LayerSpec dense(Index width) { return {LayerKind::dense, width, 0.0}; }
    static LayerSpec batch_norm() { return {LayerKind::batch_norm, 0, 0.0}; }
    static LayerSpec relu() { return {LayerKind::relu, 0, 0.0}; }
    static LayerSpec dropout(double rate) { return {LayerKind::dropout, 0, rate}; }
    static LayerSpec softmax() { return {LayerKind::softmax, 0, 0.0}; }

    bool operator==(const LayerSpec&) const = default;
};

// dense -> batch_norm -> relu -> dropout for every hidden width. Dropout is
// omitted at rate 0 and batch norm when `batch_norm` is false.
std::vector<LayerSpec> hidden_blocks(std::span<const Index> widths, double dropout, bool batch_norm = true);

// Parameters and state of one layer. Vectors are stored as 1 x width
// matrices so every table shares one type.
struct Layer {
    LayerSpec spec;
    Index in = 0;
    Index out = 0;
    Matrix weight;  // dense: in x out
    Matrix bias;    // dense: 1 x out
    Matrix gamma;   // batch norm scale
    Matrix beta;    // batch norm shift
    Matrix running_mean;
    Matrix running_var;
};

class Network {
public:
    Network() = default;
    // He-uniform dense weights (limit sqrt(6 / fan_in)), zero biases, unit
    // batch-norm scale. Deterministic per seed.
    Network(Index input_width, std::vector<LayerSpec> specs, std::uint64_t seed, double bn_momentum = 0.99,
            double bn_epsilon = 1e-5);
    // Rebuilds a network from stored layers (checkpoint loading).
    static Network from_layers(Index input_width, std::vector<Layer> layers, double bn_momentum, double bn_epsilon);

    struct Cache {
        Mode mode = Mode::eval;
        std::uint64_t version = 0;
        std::vector<Matrix> inputs;      // input of each layer
        std::vector<Matrix> aux;         // dropout: scaled mask; batch norm: x_hat; softmax: output
        std::vector<Matrix> inv_std;     // batch norm 1 / sqrt(var + eps)
        std::vector<Matrix> batch_mean;  // batch norm statistics (train)
        std::vector<Matrix> batch_var;
    };

    struct Gradients {
        std::vector<Matrix> params;  // parameters() order
        Matrix input;
    };

    Index input_width() const { return input_width_; }
    Index output_width() const;
    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<LayerSpec> specs() const;
    double bn_momentum() const { return bn_momentum_; }
    double bn_epsilon() const { return bn_epsilon_; }

    // Train mode draws dropout masks from rng and normalises with batch
    // statistics; eval mode ignores rng. Throws ShapeError on width mismatch.
    Matrix forward(const Matrix& x, Mode mode, Rng& rng, Cache* cache = nullptr) const;
    Matrix forward_eval(const Matrix& x) const;

    // Throws Error when the cache was produced before the last parameter update.
    Gradients backward(const Cache& cache, const Matrix& upstream) const;

    // Exponential moving averages of the batch statistics in cache.
    void commit_batch_statistics(const Cache& cache);

    // Trainable tensors: dense weight, bias; batch-norm gamma, beta.
    std::vector<Matrix*> parameters();
    std::vector<const Matrix*> parameters() const;
    std::size_t parameter_count() const;

    // Called by optimisers after changing parameters; invalidates caches.
    void mark_updated() { ++version_; }
    std::uint64_t version() const { return version_; }

    Layer& layer(std::size_t i) { return layers_[i]; }

private:
    Index input_width_ = 0;
    std::vector<Layer> layers_;
    double bn_momentum_ = 0.99;
    double bn_epsilon_ = 1e-5;
    std::uint64_t version_ = 0;
};

Matrix softmax(const Matrix& logits);

struct LossResult {
    double loss = 0.0;
    Matrix gradient;  // d loss / d logits
};

// Mean cross-entropy of softmax(logits); gradient (softmax - onehot) / b.
// Throws InputError for labels outside [0, classes).
LossResult softmax_cross_entropy(const Matrix& logits, std::span<const int> labels);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Bias-corrected Adam update of one tensor. `step` is the 1-based step count.
void adam_update(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v, long step, const AdamConfig& cfg);

// Adam over the parameters of a fixed list of networks.
class Adam {
public:
    Adam(AdamConfig config, std::vector<Network*> networks);

    // grads[i] belongs to networks[i]. Throws DivergenceError (leaving the
    // parameters untouched) when any gradient is non-finite.
    void step(const std::vector<Network::Gradients>& grads);
    long steps() const { return step_; }
    const AdamConfig& config() const { return config_; }

private:
    AdamConfig config_;
    std::vector<Network*> networks_;
    std::vector<std::vector<Matrix>> m_;
    std::vector<std::vector<Matrix>> v_;
    long step_ = 0;
};

struct GradCheckOptions {
    double step = 1e-6;
    // Relative deviation is |a - n| / max(|a|, |n|, scale_floor).
    double scale_floor = 1e-3;
    // Checked entries per tensor; 0 checks everything.
    std::size_t max_entries_per_tensor = 0;
    std::uint64_t sample_seed = 7;
};

struct GradCheckReport {
    double max_relative = 0.0;
    double max_absolute = 0.0;
    std::size_t checked = 0;
    std::size_t worst_tensor = 0;
    Index worst_entry = 0;

    bool passed(double tolerance) const { return max_relative < tolerance; }
};

// Compares analytic gradients with the fourth-order central difference
// [-f(+2h) + 8 f(+h) - 8 f(-h) + f(-2h)] / 12h, perturbing params in place.
// loss() must be deterministic (fixed dropout masks).
GradCheckReport compare_gradients(const std::function<double()>& loss, const std::vector<Matrix*>& params,
                                  const std::vector<Matrix>& analytic, const GradCheckOptions& options = {});

// Gradient check of a single network under softmax cross-entropy on the
// given batch, train mode, dropout masks frozen by reseeding with mask_seed.
GradCheckReport grad_check(Network& net, const Matrix& batch, std::span<const int> labels, std::uint64_t mask_seed,
                           const GradCheckOptions& options = {});

// Builds a network of `specs` with random data (batch of 8, `classes`
// outputs) from `seed` and checks it.
struct NetworkSpec {
    Index input_width = 4;
    std::vector<LayerSpec> layers;
    Index batch = 8;
};
GradCheckReport grad_check(const NetworkSpec& spec, std::uint64_t seed, const GradCheckOptions& options = {});

}  // namespace dkmo::nn
