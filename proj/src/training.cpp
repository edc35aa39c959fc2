#include "dkmo/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "dkmo/error.hpp"
#include "dkmo/matrix_io.hpp"

namespace dkmo::nn {

std::vector<int> argmax_rows(const Matrix& m) {
    std::vector<int> out(static_cast<std::size_t>(m.rows()));
    for (Index i = 0; i < m.rows(); ++i) {
        Index best = 0;
        for (Index j = 1; j < m.cols(); ++j)
            if (m(i, j) > m(i, best)) best = j;
        out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
}

double accuracy(const Matrix& logits, std::span<const int> labels) {
    const auto pred = argmax_rows(logits);
    if (pred.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == labels[i];
    return static_cast<double>(hit) / static_cast<double>(pred.size());
}

std::pair<std::vector<Index>, std::vector<Index>> holdout_split(std::span<const Index> rows,
                                                                std::span<const int> labels, double fraction,
                                                                std::uint64_t seed) {
    std::vector<Index> fit_rows, val_rows;
    if (fraction <= 0.0) {
        fit_rows.assign(rows.begin(), rows.end());
        return {fit_rows, val_rows};
    }
    std::map<int, std::vector<Index>> by_class;
    for (Index r : rows) by_class[labels[static_cast<std::size_t>(r)]].push_back(r);
    Rng rng(seed);
    for (auto& [label, members] : by_class) {
        rng.shuffle(std::span<Index>(members));
        auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
        take = std::min(take, members.size() > 1 ? members.size() - 1 : std::size_t{0});
        val_rows.insert(val_rows.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
        fit_rows.insert(fit_rows.end(), members.begin() + static_cast<std::ptrdiff_t>(take), members.end());
    }
    std::sort(fit_rows.begin(), fit_rows.end());
    std::sort(val_rows.begin(), val_rows.end());
    return {fit_rows, val_rows};
}

namespace {

std::vector<int> labels_of(std::span<const int> labels, std::span<const Index> rows) {
    std::vector<int> out;
    out.reserve(rows.size());
    for (Index r : rows) out.push_back(labels[static_cast<std::size_t>(r)]);
    return out;
}

}  // namespace

TrainLog fit(Trainable& model, std::span<const int> labels, std::span<const Index> rows, const TrainConfig& config,
             std::uint64_t seed, std::span<const Index> validation_rows) {
    if (rows.empty()) throw InputError("fit: no training rows");
    if (config.batch_size < 1) throw ConfigError("fit: batch size must be >= 1");

    std::vector<Index> fit_rows;
    std::vector<Index> val_rows;
    if (!validation_rows.empty()) {
        fit_rows.assign(rows.begin(), rows.end());
        val_rows.assign(validation_rows.begin(), validation_rows.end());
    } else {
        std::tie(fit_rows, val_rows) = holdout_split(rows, labels, config.val_fraction, derive_seed(seed, "holdout"));
    }
    const std::vector<int> val_labels = labels_of(labels, val_rows);

    Adam adam(config.adam, model.networks());
    Rng rng(derive_seed(seed, "batches"));
    TrainLog log;

    std::vector<Network> best;
    double best_val = std::numeric_limits<double>::infinity();
    int since_best = 0;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        rng.shuffle(std::span<Index>(fit_rows));
        double loss_sum = 0.0;
        std::size_t hits = 0;
        const auto n = static_cast<Index>(fit_rows.size());
        for (Index start = 0; start < n;) {
            Index end = std::min(n, start + config.batch_size);
            // A trailing single-sample batch would give degenerate batch
            // statistics; fold it into the previous batch.
            if (n - end == 1) end = n;
            std::span<const Index> batch(fit_rows.data() + start, static_cast<std::size_t>(end - start));
            const std::vector<int> batch_labels = labels_of(labels, batch);
            const Matrix logits = model.train_forward(batch, rng);
            const auto loss = softmax_cross_entropy(logits, batch_labels);
            if (!std::isfinite(loss.loss)) {
                throw DivergenceError("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                                      ", Adam step " + std::to_string(adam.steps() + 1));
            }
            adam.step(model.train_backward(loss.gradient));
            loss_sum += loss.loss * static_cast<double>(batch.size());
            const auto pred = argmax_rows(logits);
            for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == batch_labels[i];
            start = end;
        }

        EpochLog entry;
        entry.epoch = epoch;
        entry.train_loss = loss_sum / static_cast<double>(n);
        entry.train_accuracy = static_cast<double>(hits) / static_cast<double>(n);
        if (!val_rows.empty()) {
            const Matrix logits = model.eval_logits(val_rows);
            entry.val_loss = softmax_cross_entropy(logits, val_labels).loss;
            entry.val_accuracy = accuracy(logits, val_labels);
            if (!std::isfinite(entry.val_loss)) {
                throw DivergenceError("training diverged: non-finite validation loss at epoch " + std::to_string(epoch));
            }
        }
        log.epochs.push_back(entry);

        if (val_rows.empty()) continue;
        if (entry.val_loss < best_val) {
            best_val = entry.val_loss;
            since_best = 0;
            log.best_epoch = epoch;
            best.clear();
            for (Network* net : model.networks()) best.push_back(*net);
        } else if (config.patience > 0 && ++since_best >= config.patience) {
            log.stopped_early = true;
            break;
        }
    }

    if (!best.empty()) {
        auto nets = model.networks();
        for (std::size_t i = 0; i < nets.size(); ++i) {
            *nets[i] = std::move(best[i]);
            nets[i]->mark_updated();
        }
    }
    return log;
}

void write_log_csv(const std::string& path, const TrainLog& log) {
    std::ofstream out(path);
    if (!out) throw Error(path + ": cannot open for writing");
    out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
    for (const auto& e : log.epochs) {
        out << e.epoch << ',' << io::format_double(e.train_loss) << ',' << io::format_double(e.train_accuracy) << ','
            << io::format_double(e.val_loss) << ',' << io::format_double(e.val_accuracy) << '\n';
    }
}

}  // namespace dkmo::nn
