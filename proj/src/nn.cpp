#include "dkmo/nn.hpp"

#include <algorithm>
#include <cmath>

#include "dkmo/error.hpp"

namespace dkmo::nn {

std::string to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::dense: return "dense";
        case LayerKind::batch_norm: return "batch_norm";
        case LayerKind::relu: return "relu";
        case LayerKind::dropout: return "dropout";
        case LayerKind::softmax: return "softmax";
    }
    return "?";
}

std::vector<LayerSpec> hidden_blocks(std::span<const Index> widths, double dropout, bool batch_norm) {
    std::vector<LayerSpec> specs;
    for (Index w : widths) {
        specs.push_back(LayerSpec::dense(w));
        if (batch_norm) specs.push_back(LayerSpec::batch_norm());
        specs.push_back(LayerSpec::relu());
        if (dropout > 0.0) specs.push_back(LayerSpec::dropout(dropout));
    }
    return specs;
}

Network::Network(Index input_width, std::vector<LayerSpec> specs, std::uint64_t seed, double bn_momentum,
                 double bn_epsilon)
    : input_width_(input_width), bn_momentum_(bn_momentum), bn_epsilon_(bn_epsilon) {
    if (input_width < 1) throw InputError("network input width must be >= 1");
    Rng rng(seed);
    Index width = input_width;
    for (const auto& spec : specs) {
        Layer layer;
        layer.spec = spec;
        layer.in = width;
        switch (spec.kind) {
            case LayerKind::dense: {
                if (spec.width < 1) throw InputError("dense layer width must be >= 1");
                layer.out = spec.width;
                const double limit = std::sqrt(6.0 / static_cast<double>(width));
                layer.weight.resize(width, spec.width);
                for (Index j = 0; j < spec.width; ++j)
                    for (Index i = 0; i < width; ++i) layer.weight(i, j) = rng.uniform(-limit, limit);
                layer.bias = Matrix::Zero(1, spec.width);
                break;
            }
            case LayerKind::batch_norm:
                layer.out = width;
                layer.gamma = Matrix::Ones(1, width);
                layer.beta = Matrix::Zero(1, width);
                layer.running_mean = Matrix::Zero(1, width);
                layer.running_var = Matrix::Ones(1, width);
                break;
            case LayerKind::dropout:
                if (!(spec.rate >= 0.0 && spec.rate < 1.0)) throw InputError("dropout rate must lie in [0, 1)");
                layer.out = width;
                break;
            case LayerKind::relu:
            case LayerKind::softmax:
                layer.out = width;
                break;
        }
        width = layer.out;
        layers_.push_back(std::move(layer));
    }
}

Network Network::from_layers(Index input_width, std::vector<Layer> layers, double bn_momentum, double bn_epsilon) {
    Network net;
    net.input_width_ = input_width;
    net.bn_momentum_ = bn_momentum;
    net.bn_epsilon_ = bn_epsilon;
    Index width = input_width;
    for (auto& l : layers) {
        if (l.in != width) throw ShapeError("stored layers have inconsistent widths");
        width = l.out;
    }
    net.layers_ = std::move(layers);
    return net;
}

Index Network::output_width() const { return layers_.empty() ? input_width_ : layers_.back().out; }

std::vector<LayerSpec> Network::specs() const {
    std::vector<LayerSpec> out;
    for (const auto& l : layers_) out.push_back(l.spec);
    return out;
}

Matrix softmax(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Index i = 0; i < logits.rows(); ++i) {
        const double top = logits.row(i).maxCoeff();
        auto e = (logits.row(i).array() - top).exp();
        out.row(i) = e / e.sum();
    }
    return out;
}

Matrix Network::forward(const Matrix& x, Mode mode, Rng& rng, Cache* cache) const {
    if (x.cols() != input_width_) {
        throw ShapeError("network input has width " + std::to_string(x.cols()) + ", expected " +
                         std::to_string(input_width_));
    }
    if (cache) {
        *cache = Cache{};
        cache->mode = mode;
        cache->version = version_;
        cache->inputs.reserve(layers_.size());
        cache->aux.resize(layers_.size());
        cache->inv_std.resize(layers_.size());
        cache->batch_mean.resize(layers_.size());
        cache->batch_var.resize(layers_.size());
    }
    Matrix a = x;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        const Layer& l = layers_[li];
        if (cache) cache->inputs.push_back(a);
        switch (l.spec.kind) {
            case LayerKind::dense: {
                Matrix out = a * l.weight;
                out.rowwise() += l.bias.row(0);
                a = std::move(out);
                break;
            }
            case LayerKind::batch_norm: {
                Matrix mean, var;
                if (mode == Mode::train) {
                    mean = a.colwise().mean();
                    var = (a.rowwise() - mean.row(0)).array().square().colwise().mean().matrix();
                } else {
                    mean = l.running_mean;
                    var = l.running_var;
                }
                Matrix inv_std = (var.array() + bn_epsilon_).rsqrt().matrix();
                Matrix xhat = (a.rowwise() - mean.row(0)).array().rowwise() * inv_std.row(0).array();
                Matrix out = xhat.array().rowwise() * l.gamma.row(0).array();
                out.rowwise() += l.beta.row(0);
                if (cache) {
                    cache->aux[li] = std::move(xhat);
                    cache->inv_std[li] = std::move(inv_std);
                    cache->batch_mean[li] = std::move(mean);
                    cache->batch_var[li] = std::move(var);
                }
                a = std::move(out);
                break;
            }
            case LayerKind::relu:
                a = a.cwiseMax(0.0);
                break;
            case LayerKind::dropout: {
                if (mode == Mode::train && l.spec.rate > 0.0) {
                    const double keep = 1.0 - l.spec.rate;
                    Matrix mask(a.rows(), a.cols());
                    for (Index j = 0; j < a.cols(); ++j)
                        for (Index i = 0; i < a.rows(); ++i) mask(i, j) = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
                    a = a.cwiseProduct(mask);
                    if (cache) cache->aux[li] = std::move(mask);
                }
                break;
            }
            case LayerKind::softmax:
                a = softmax(a);
                if (cache) cache->aux[li] = a;
                break;
        }
    }
    return a;
}

Matrix Network::forward_eval(const Matrix& x) const {
    Rng unused(0);
    return forward(x, Mode::eval, unused, nullptr);
}

Network::Gradients Network::backward(const Cache& cache, const Matrix& upstream) const {
    if (cache.version != version_ || cache.inputs.size() != layers_.size()) {
        throw Error("network backward: forward cache is stale (parameters changed since the forward pass)");
    }
    if (upstream.cols() != output_width() ||
        (!cache.inputs.empty() && upstream.rows() != cache.inputs.front().rows())) {
        throw ShapeError("network backward: upstream gradient shape does not match the cached batch");
    }
    Gradients grads;
    std::vector<std::vector<Matrix>> per_layer(layers_.size());
    Matrix g = upstream;
    for (std::size_t k = layers_.size(); k-- > 0;) {
        const Layer& l = layers_[k];
        const Matrix& in = cache.inputs[k];
        switch (l.spec.kind) {
            case LayerKind::dense: {
                per_layer[k].push_back(in.transpose() * g);
                per_layer[k].push_back(g.colwise().sum());
                g = g * l.weight.transpose();
                break;
            }
            case LayerKind::batch_norm: {
                const Matrix& xhat = cache.aux[k];
                const Matrix& inv_std = cache.inv_std[k];
                per_layer[k].push_back(g.cwiseProduct(xhat).colwise().sum());
                per_layer[k].push_back(g.colwise().sum());
                Matrix dxhat = g.array().rowwise() * l.gamma.row(0).array();
                if (cache.mode == Mode::train) {
                    const double b = static_cast<double>(g.rows());
                    const Matrix sum_d = dxhat.colwise().sum();
                    const Matrix sum_dx = dxhat.cwiseProduct(xhat).colwise().sum();
                    Matrix t = (b * dxhat).rowwise() - sum_d.row(0);
                    t -= (xhat.array().rowwise() * sum_dx.row(0).array()).matrix();
                    g = (t.array().rowwise() * inv_std.row(0).array()).matrix() / b;
                } else {
                    g = dxhat.array().rowwise() * inv_std.row(0).array();
                }
                break;
            }
            case LayerKind::relu:
                g = g.cwiseProduct((in.array() > 0.0).cast<double>().matrix());
                break;
            case LayerKind::dropout:
                if (cache.mode == Mode::train && l.spec.rate > 0.0) g = g.cwiseProduct(cache.aux[k]);
                break;
            case LayerKind::softmax: {
                const Matrix& y = cache.aux[k];
                const linalg::Vector dots = g.cwiseProduct(y).rowwise().sum();
                g = y.cwiseProduct(g.colwise() - dots);
                break;
            }
        }
    }
    for (auto& tensors : per_layer)
        for (auto& t : tensors) grads.params.push_back(std::move(t));
    grads.input = std::move(g);
    return grads;
}

void Network::commit_batch_statistics(const Cache& cache) {
    if (cache.mode != Mode::train) return;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        Layer& l = layers_[k];
        if (l.spec.kind != LayerKind::batch_norm || cache.batch_mean[k].size() == 0) continue;
        const double b = static_cast<double>(cache.inputs[k].rows());
        const double correction = b > 1.0 ? b / (b - 1.0) : 1.0;
        l.running_mean = bn_momentum_ * l.running_mean + (1.0 - bn_momentum_) * cache.batch_mean[k];
        l.running_var = bn_momentum_ * l.running_var + (1.0 - bn_momentum_) * correction * cache.batch_var[k];
    }
}

std::vector<Matrix*> Network::parameters() {
    std::vector<Matrix*> out;
    for (auto& l : layers_) {
        if (l.spec.kind == LayerKind::dense) {
            out.push_back(&l.weight);
            out.push_back(&l.bias);
        } else if (l.spec.kind == LayerKind::batch_norm) {
            out.push_back(&l.gamma);
            out.push_back(&l.beta);
        }
    }
    return out;
}

std::vector<const Matrix*> Network::parameters() const {
    std::vector<const Matrix*> out;
    for (const auto& l : layers_) {
        if (l.spec.kind == LayerKind::dense) {
            out.push_back(&l.weight);
            out.push_back(&l.bias);
        } else if (l.spec.kind == LayerKind::batch_norm) {
            out.push_back(&l.gamma);
            out.push_back(&l.beta);
        }
    }
    return out;
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const Matrix* p : parameters()) n += static_cast<std::size_t>(p->size());
    return n;
}

LossResult softmax_cross_entropy(const Matrix& logits, std::span<const int> labels) {
    const Index b = logits.rows();
    const Index c = logits.cols();
    if (static_cast<Index>(labels.size()) != b) throw ShapeError("softmax_cross_entropy: label count != batch size");
    if (b == 0) throw InputError("softmax_cross_entropy: empty batch");
    LossResult out;
    out.gradient = softmax(logits);
    double total = 0.0;
    for (Index i = 0; i < b; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        if (y < 0 || y >= c) {
            throw InputError("softmax_cross_entropy: label " + std::to_string(y) + " outside [0, " + std::to_string(c) +
                             ")");
        }
        const double top = logits.row(i).maxCoeff();
        const double lse = top + std::log((logits.row(i).array() - top).exp().sum());
        total += lse - logits(i, y);
        out.gradient(i, y) -= 1.0;
    }
    out.loss = total / static_cast<double>(b);
    out.gradient /= static_cast<double>(b);
    return out;
}

void adam_update(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v, long step, const AdamConfig& cfg) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    param.array() -= cfg.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
}

Adam::Adam(AdamConfig config, std::vector<Network*> networks) : config_(config), networks_(std::move(networks)) {
    for (Network* net : networks_) {
        std::vector<Matrix> m, v;
        for (const Matrix* p : std::as_const(*net).parameters()) {
            m.push_back(Matrix::Zero(p->rows(), p->cols()));
            v.push_back(Matrix::Zero(p->rows(), p->cols()));
        }
        m_.push_back(std::move(m));
        v_.push_back(std::move(v));
    }
}

void Adam::step(const std::vector<Network::Gradients>& grads) {
    if (grads.size() != networks_.size()) throw ShapeError("adam: gradient list does not match network list");
    for (std::size_t n = 0; n < networks_.size(); ++n) {
        const auto& g = grads[n].params;
        if (g.size() != m_[n].size()) throw ShapeError("adam: gradient count does not match parameter count");
        for (std::size_t t = 0; t < g.size(); ++t) {
            if (g[t].rows() != m_[n][t].rows() || g[t].cols() != m_[n][t].cols()) {
                throw ShapeError("adam: gradient shape does not match its parameter");
            }
            if (!g[t].allFinite()) {
                throw DivergenceError("adam: non-finite gradient in network " + std::to_string(n) + ", tensor " +
                                      std::to_string(t) + " at step " + std::to_string(step_ + 1));
            }
        }
    }
    ++step_;
    for (std::size_t n = 0; n < networks_.size(); ++n) {
        auto params = networks_[n]->parameters();
        for (std::size_t t = 0; t < params.size(); ++t)
            adam_update(*params[t], grads[n].params[t], m_[n][t], v_[n][t], step_, config_);
        networks_[n]->mark_updated();
    }
}

GradCheckReport compare_gradients(const std::function<double()>& loss, const std::vector<Matrix*>& params,
                                  const std::vector<Matrix>& analytic, const GradCheckOptions& options) {
    if (params.size() != analytic.size()) throw ShapeError("compare_gradients: tensor count mismatch");
    GradCheckReport report;
    Rng pick(options.sample_seed);
    const double h = options.step;
    for (std::size_t t = 0; t < params.size(); ++t) {
        Matrix& p = *params[t];
        if (p.rows() != analytic[t].rows() || p.cols() != analytic[t].cols()) {
            throw ShapeError("compare_gradients: gradient shape mismatch");
        }
        std::vector<Index> entries;
        const auto size = static_cast<std::size_t>(p.size());
        if (options.max_entries_per_tensor == 0 || size <= options.max_entries_per_tensor) {
            for (Index e = 0; e < p.size(); ++e) entries.push_back(e);
        } else {
            for (std::size_t e : pick.sample_without_replacement(size, options.max_entries_per_tensor))
                entries.push_back(static_cast<Index>(e));
        }
        for (Index e : entries) {
            double& w = p.data()[e];
            const double orig = w;
            w = orig + 2 * h;
            const double fp2 = loss();
            w = orig + h;
            const double fp1 = loss();
            w = orig - h;
            const double fm1 = loss();
            w = orig - 2 * h;
            const double fm2 = loss();
            w = orig;
            const double numeric = (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * h);
            const double a = analytic[t].data()[e];
            const double abs_dev = std::abs(a - numeric);
            const double rel_dev = abs_dev / std::max({std::abs(a), std::abs(numeric), options.scale_floor});
            report.max_absolute = std::max(report.max_absolute, abs_dev);
            if (rel_dev > report.max_relative) {
                report.max_relative = rel_dev;
                report.worst_tensor = t;
                report.worst_entry = e;
            }
            ++report.checked;
        }
    }
    return report;
}

GradCheckReport grad_check(Network& net, const Matrix& batch, std::span<const int> labels, std::uint64_t mask_seed,
                           const GradCheckOptions& options) {
    Rng rng(mask_seed);
    Network::Cache cache;
    const Matrix logits = net.forward(batch, Mode::train, rng, &cache);
    const auto loss = softmax_cross_entropy(logits, labels);
    const auto grads = net.backward(cache, loss.gradient);
    auto objective = [&] {
        Rng frozen(mask_seed);
        return softmax_cross_entropy(net.forward(batch, Mode::train, frozen), labels).loss;
    };
    return compare_gradients(objective, net.parameters(), grads.params, options);
}

GradCheckReport grad_check(const NetworkSpec& spec, std::uint64_t seed, const GradCheckOptions& options) {
    Network net(spec.input_width, spec.layers, derive_seed(seed, "weights"));
    const Index classes = net.output_width();
    Rng rng(derive_seed(seed, "data"));
    Matrix batch(spec.batch, spec.input_width);
    for (Index j = 0; j < batch.cols(); ++j)
        for (Index i = 0; i < batch.rows(); ++i) batch(i, j) = rng.normal();
    std::vector<int> labels(static_cast<std::size_t>(spec.batch));
    for (auto& l : labels) l = static_cast<int>(rng.index(static_cast<std::size_t>(classes)));
    // Perturb batch-norm scales and biases away from their trivial init so
    // their gradients are exercised.
    for (auto* p : net.parameters())
        if (p->rows() == 1) p->array() += 0.1 * Matrix::NullaryExpr(1, p->cols(), [&] { return rng.normal(); }).array();
    return grad_check(net, batch, labels, derive_seed(seed, "masks"), options);
}

}  // namespace dkmo::nn
