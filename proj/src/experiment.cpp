#include "dkmo/experiment.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "dkmo/error.hpp"
#include "dkmo/kernels.hpp"
#include "dkmo/matrix_io.hpp"
#include "dkmo/synthetic.hpp"

namespace dkmo::experiment {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void note(const Context& ctx, const std::string& msg) {
    if (!ctx.quiet) std::cerr << msg << '\n';
}

std::string percent(double v) {
    std::ostringstream os;
    os.precision(2);
    os << std::fixed << 100.0 * v << '%';
    return os.str();
}

bundle::BundleInfo info_for(const config::ExperimentConfig& cfg, const Prepared& p) {
    bundle::BundleInfo info;
    info.config_hash = config::config_hash(cfg);
    info.seed = cfg.seed;
    info.class_names = p.dataset.class_names;
    info.config_json = config::dump_config(cfg);
    return info;
}

metrics::RunInfo run_info(const std::string& model, const config::ExperimentConfig& cfg, double seconds) {
    return {model, config::config_hash(cfg), cfg.seed, seconds};
}

std::uint64_t rows_hash(std::span<const Index> rows) {
    std::string bytes;
    for (Index r : rows) bytes += std::to_string(r) + ",";
    return fnv1a(bytes);
}

Outcome score(const Matrix& proba, const Prepared& p) {
    Outcome o;
    o.metrics = metrics::evaluate(p.test_labels, nn::argmax_rows(proba), p.classes);
    return o;
}

void require_test(const Prepared& p) {
    if (p.dataset.split.test.empty()) throw InputError("the split leaves no test samples");
}

}  // namespace

Prepared prepare_data(const config::ExperimentConfig& cfg) {
    Prepared p;
    if (cfg.data.synthetic) {
        const auto& s = *cfg.data.synthetic;
        const std::uint64_t seed = s.seed.value_or(derive_seed(cfg.seed, "data"));
        if (s.kind == "blobs") {
            p.dataset = data::blobs(s.blobs, seed);
        } else if (s.kind == "rings") {
            p.dataset = data::rings(s.rings, seed);
        } else {
            p.dataset = data::multiview(s.multiview, seed);
        }
    } else {
        p.dataset = data::load_dataset(*cfg.data.files);
    }
    p.dataset.class_names = cfg.data.class_names;
    p.dataset.split = data::make_split(p.dataset.labels, cfg.data.split, derive_seed(cfg.seed, "split"));
    p.dataset.validate();
    p.classes = p.dataset.classes();
    if (!p.dataset.class_names.empty() && static_cast<int>(p.dataset.class_names.size()) != p.classes) {
        throw ConfigError("data.class_names lists " + std::to_string(p.dataset.class_names.size()) +
                          " names for " + std::to_string(p.classes) + " classes");
    }
    p.train_labels = p.dataset.labels_at(p.dataset.split.train);
    p.test_labels = p.dataset.labels_at(p.dataset.split.test);
    return p;
}

model::SampleInput BoundKernel::input(std::span<const Index> rows, bool kernel_rows) const {
    model::SampleInput in;
    if (features) in.features = linalg::select_rows(*features, rows);
    if (kernel_rows) {
        if (full_kernel) {
            in.kernel_rows = linalg::select(*full_kernel, rows, train);
        } else {
            in.kernel_rows = kernels::cross_gram(*in.features, linalg::select_rows(*features, train), source.function);
        }
    }
    return in;
}

Matrix BoundKernel::all_pairs() const {
    if (full_kernel) return *full_kernel;
    return kernels::kernel_from_features(*features, source.function, source.name).values();
}

BoundKernel bind_kernel(const Prepared& p, const config::KernelSpec& spec) {
    using config::KernelType;
    BoundKernel b;
    b.train = p.dataset.split.train;
    b.source.name = spec.name;
    const bool from_features =
        spec.type == KernelType::rbf || spec.type == KernelType::exp_chi2 || spec.type == KernelType::linear;
    if (from_features) {
        const auto* view = p.dataset.view(spec.source);
        if (!view) throw ConfigError("kernel '" + spec.name + "' needs feature view '" + spec.source + "'");
        b.features = view->values;
        const Matrix train_x = linalg::select_rows(view->values, b.train);
        kernels::KernelFunction kfn;
        kfn.kind = spec.type == KernelType::rbf      ? kernels::KernelKind::rbf
                   : spec.type == KernelType::exp_chi2 ? kernels::KernelKind::exp_chi2
                                                       : kernels::KernelKind::linear;
        kfn.normalized = true;
        if (kfn.kind != kernels::KernelKind::linear) {
            kfn.gamma = spec.gamma ? *spec.gamma : kernels::estimate_gamma(kernels::feature_distances(train_x, kfn.kind));
        }
        b.gamma = kfn.gamma;
        b.source.function = kfn;
        b.source.features = train_x;
        return b;
    }
    const auto* table = p.dataset.table(spec.source);
    if (!table) throw ConfigError("kernel '" + spec.name + "' needs table '" + spec.source + "'");
    kernels::KernelMatrix full;
    if (spec.type == KernelType::precomputed) {
        if (table->kind != data::TableKind::kernel) {
            throw ConfigError("kernel '" + spec.name + "': table '" + spec.source + "' is a distance table");
        }
        full = kernels::KernelMatrix(table->values, spec.name);
    } else {
        if (table->kind != data::TableKind::distance) {
            throw ConfigError("kernel '" + spec.name + "': table '" + spec.source + "' is not a distance table");
        }
        const kernels::DistanceMatrix d(table->values, spec.source);
        b.gamma = spec.gamma ? *spec.gamma
                             : kernels::estimate_gamma(kernels::DistanceMatrix(linalg::select(d.values(), b.train, b.train)));
        full = kernels::exp_distance_kernel(d, b.gamma, spec.name);
    }
    full = kernels::normalize_kernel(full).renamed(spec.name);
    b.source.kernel = kernels::KernelMatrix(linalg::select(full.values(), b.train, b.train), spec.name);
    b.full_kernel = full.values();
    return b;
}

bool needs_kernel_rows(const nystroem::EmbeddingEnsemble& ensemble) {
    for (const auto& m : ensemble.members)
        if (m.is_conventional()) return true;
    return false;
}

std::vector<std::string> validate(const config::ExperimentConfig& cfg) {
    std::vector<std::string> lines;
    const Prepared p = prepare_data(cfg);
    std::ostringstream head;
    head << "dataset: " << p.dataset.size() << " samples, " << p.classes << " classes, " << p.dataset.views.size()
         << " feature views, " << p.dataset.tables.size() << " tables; split " << p.dataset.split.train.size()
         << " train / " << p.dataset.split.test.size() << " test";
    lines.push_back(head.str());
    for (const auto& spec : cfg.kernels) {
        const BoundKernel b = bind_kernel(p, spec);
        const Matrix k = b.source.kernel ? b.source.kernel->values()
                                         : kernels::kernel_from_features(*b.source.features, b.source.function, spec.name).values();
        const auto report = kernels::validate_kernel(k, true);
        std::ostringstream os;
        os << "kernel " << spec.name << " (" << config::to_string(spec.type) << ", gamma " << b.gamma
           << "): symmetric=" << report.symmetric << " positive_diagonal=" << report.positive_diagonal
           << " psd=" << report.psd.value_or(false) << " min_eigenvalue=" << report.min_eigenvalue.value_or(0.0);
        lines.push_back(os.str());
        if (!report.ok()) throw InputError("kernel '" + spec.name + "' failed validation");
    }
    return lines;
}

void embed(const config::ExperimentConfig& cfg, const fs::path& out, const Context& ctx) {
    const Prepared p = prepare_data(cfg);
    for (const auto& spec : cfg.kernels) {
        const BoundKernel b = bind_kernel(p, spec);
        const auto ensemble =
            model::build_ensemble(b.source, cfg.embedding, derive_seed(derive_seed(cfg.seed, "embedding"), spec.name), ctx.threads);
        bundle::save_ensemble(out / spec.name, ensemble);
        std::ostringstream os;
        os << "embedded " << spec.name << ": " << ensemble.size() << " members";
        for (const auto& m : ensemble.members) os << "\n  " << m.describe();
        note(ctx, os.str());
    }
}

Outcome train(const config::ExperimentConfig& cfg, const fs::path& out, const Context& ctx) {
    const auto t0 = Clock::now();
    const Prepared p = prepare_data(cfg);
    require_test(p);
    const auto& spec = cfg.single_kernel();
    const BoundKernel b = bind_kernel(p, spec);
    const auto ensemble =
        model::build_ensemble(b.source, cfg.embedding, derive_seed(derive_seed(cfg.seed, "embedding"), spec.name), ctx.threads);
    note(ctx, "kernel " + spec.name + ": " + std::to_string(ensemble.size()) + " embeddings");
    auto result = model::dkmo_train(ensemble, p.train_labels, cfg.dkmo, derive_seed(cfg.seed, "train"));
    const Matrix proba = result.model.predict_proba(b.input(p.dataset.split.test, needs_kernel_rows(ensemble)));
    Outcome o = score(proba, p);
    fs::create_directories(out);
    bundle::save_dkmo(out, result.model, info_for(cfg, p));
    nn::write_log_csv((out / "train_log.csv").string(), result.log);
    o.seconds = elapsed(t0);
    metrics::write_metrics_json(out / "metrics.json", run_info("dkmo", cfg, o.seconds), o.metrics);
    note(ctx, "test accuracy " + percent(o.metrics.accuracy) + " (macro " + percent(o.metrics.macro_accuracy) + ")");
    return o;
}

Outcome pretrain(const config::ExperimentConfig& cfg, const fs::path& out, const Context& ctx) {
    const auto t0 = Clock::now();
    const Prepared p = prepare_data(cfg);
    require_test(p);
    std::vector<BoundKernel> bound;
    std::vector<model::KernelSource> sources;
    for (const auto& spec : cfg.kernels) {
        bound.push_back(bind_kernel(p, spec));
        sources.push_back(bound.back().source);
    }
    auto results = model::pretrain_all(sources, p.train_labels, cfg.embedding, cfg.dkmo,
                                       derive_seed(cfg.seed, "pretrain"), ctx.threads);
    fs::create_directories(out);
    Outcome best;
    std::vector<std::string> names;
    for (std::size_t m = 0; m < results.size(); ++m) {
        const auto& spec = cfg.kernels[m];
        const auto& model = results[m].model;
        const Matrix proba =
            model.predict_proba(bound[m].input(p.dataset.split.test, needs_kernel_rows(model.ensemble())));
        Outcome o = score(proba, p);
        const fs::path dir = out / ("pretrained_" + spec.name);
        bundle::save_dkmo(dir, model, info_for(cfg, p));
        nn::write_log_csv((dir / "train_log.csv").string(), results[m].log);
        metrics::write_metrics_json(dir / "metrics.json", run_info("dkmo", cfg, elapsed(t0)), o.metrics);
        best.extras.emplace_back("accuracy_" + spec.name, o.metrics.accuracy);
        note(ctx, "kernel " + spec.name + ": test accuracy " + percent(o.metrics.accuracy));
        if (m == 0 || o.metrics.accuracy > best.metrics.accuracy) best.metrics = o.metrics;
        names.push_back(spec.name);
    }
    std::ofstream manifest(out / "manifest.txt", std::ios::binary);
    manifest << "format dkmo-pretrained-1\nkernels";
    for (const auto& n : names) manifest << ' ' << n;
    manifest << "\nsamples " << p.dataset.split.train.size() << "\ntrain_rows " << rows_hash(p.dataset.split.train)
             << "\nconfig_hash " << config::config_hash(cfg) << "\nseed " << cfg.seed << '\n';
    best.seconds = elapsed(t0);
    return best;
}

Outcome fuse_train(const config::ExperimentConfig& cfg, const fs::path& pretrained, const fs::path& out,
                   const Context& ctx) {
    const auto t0 = Clock::now();
    const Prepared p = prepare_data(cfg);
    require_test(p);
    {
        std::ifstream in(pretrained / "manifest.txt", std::ios::binary);
        if (!in) throw IngestError("cannot open " + (pretrained / "manifest.txt").string());
        std::map<std::string, std::string> fields;
        for (std::string line; std::getline(in, line);) {
            const auto sp = line.find(' ');
            if (sp != std::string::npos) fields[line.substr(0, sp)] = line.substr(sp + 1);
        }
        if (fields["format"] != "dkmo-pretrained-1") throw IngestError(pretrained.string() + ": not a pretrain output");
        if (fields["train_rows"] != std::to_string(rows_hash(p.dataset.split.train))) {
            throw ConfigError(pretrained.string() + ": pretrained on a different training split");
        }
    }
    std::vector<model::DkmoModel> models;
    std::vector<BoundKernel> bound;
    for (const auto& spec : cfg.kernels) {
        auto loaded = bundle::load_dkmo(pretrained / ("pretrained_" + spec.name));
        if (loaded.model.ensemble().samples() != static_cast<Index>(p.train_labels.size())) {
            throw ConfigError("pretrained kernel '" + spec.name + "' has a different sample count");
        }
        models.push_back(std::move(loaded.model));
        bound.push_back(bind_kernel(p, spec));
    }
    auto fused = model::build_mdkmo(models, cfg.global_fusion, derive_seed(cfg.seed, "global"));
    note(ctx, "fine-tuning " + std::to_string(models.size()) + " kernels");
    const auto log = model::finetune(fused, p.train_labels, cfg.finetune, derive_seed(cfg.seed, "finetune"));
    std::vector<model::SampleInput> inputs;
    for (std::size_t m = 0; m < bound.size(); ++m)
        inputs.push_back(bound[m].input(p.dataset.split.test, needs_kernel_rows(fused.ensembles()[m])));
    Outcome o = score(fused.predict_proba(inputs), p);
    fs::create_directories(out);
    bundle::save_mdkmo(out, fused, info_for(cfg, p));
    nn::write_log_csv((out / "train_log.csv").string(), log);
    o.seconds = elapsed(t0);
    metrics::write_metrics_json(out / "metrics.json", run_info("mdkmo", cfg, o.seconds), o.metrics);
    note(ctx, "test accuracy " + percent(o.metrics.accuracy) + " (macro " + percent(o.metrics.macro_accuracy) + ")");
    return o;
}

Outcome baseline(const config::ExperimentConfig& cfg, const std::string& method, const fs::path& out,
                 const Context& ctx) {
    const auto t0 = Clock::now();
    const Prepared p = prepare_data(cfg);
    require_test(p);
    Matrix full;
    if (method == "decomp") {
        full = bind_kernel(p, cfg.single_kernel()).all_pairs();
    } else if (method == "uniform") {
        std::vector<kernels::KernelMatrix> ks;
        for (const auto& spec : cfg.kernels) ks.emplace_back(bind_kernel(p, spec).all_pairs(), spec.name);
        full = kernels::uniform_average(ks).values();
    } else {
        throw ConfigError("unknown baseline method '" + method + "' (expected decomp or uniform)");
    }
    const auto& train_rows = p.dataset.split.train;
    const kernels::KernelMatrix k_train(linalg::select(full, train_rows, train_rows), method);
    const Index rank = std::min<Index>(cfg.baseline.rank, k_train.size());
    const auto decomp = model::decomp_features(k_train, rank);
    const auto clf = model::softmax_baseline(decomp.features, p.train_labels, cfg.baseline.train,
                                             derive_seed(cfg.seed, "baseline"));
    const Matrix test_features = linalg::select(full, p.dataset.split.test, train_rows) * decomp.map;
    Outcome o = score(clf.predict_proba(test_features), p);
    o.extras.emplace_back("rank", static_cast<double>(rank));
    o.extras.emplace_back("train_accuracy", clf.train_accuracy);
    fs::create_directories(out);
    nn::write_log_csv((out / "train_log.csv").string(), clf.log);
    o.seconds = elapsed(t0);
    metrics::write_metrics_json(out / "metrics.json", run_info(method, cfg, o.seconds), o.metrics, o.extras);
    note(ctx, method + " baseline test accuracy " + percent(o.metrics.accuracy));
    return o;
}

namespace {

model::SampleInput raw_input(const nystroem::EmbeddingEnsemble& ensemble, const fs::path& path) {
    model::SampleInput in;
    Matrix m = io::read_matrix(path);
    if (needs_kernel_rows(ensemble)) {
        if (m.cols() != ensemble.samples()) {
            throw BindingError(path.string() + ": expected kernel rows against " + std::to_string(ensemble.samples()) +
                               " training samples, got " + std::to_string(m.cols()) + " columns");
        }
        in.kernel_rows = std::move(m);
    } else {
        in.features = std::move(m);
    }
    return in;
}

std::vector<std::string> labels_or_indices(const std::vector<std::string>& names, int classes) {
    if (!names.empty()) return names;
    std::vector<std::string> out;
    for (int c = 0; c < classes; ++c) out.push_back(std::to_string(c));
    return out;
}

}  // namespace

Prediction predict(const fs::path& dir, const std::vector<fs::path>& inputs) {
    Prediction out;
    if (bundle::bundle_kind(dir) == bundle::BundleKind::dkmo) {
        const auto loaded = bundle::load_dkmo(dir);
        if (inputs.size() != 1) {
            throw BindingError("DKMO model takes one input file, got " + std::to_string(inputs.size()));
        }
        out.probabilities = loaded.model.predict_proba(raw_input(loaded.model.ensemble(), inputs.front()));
        out.class_labels = labels_or_indices(loaded.info.class_names, loaded.model.classes());
    } else {
        const auto loaded = bundle::load_mdkmo(dir);
        const auto& names = loaded.model.kernel_names();
        if (inputs.size() != names.size()) {
            throw BindingError("M-DKMO model takes one input per kernel (" + std::to_string(names.size()) + "), got " +
                               std::to_string(inputs.size()));
        }
        std::vector<model::SampleInput> per_kernel;
        for (std::size_t m = 0; m < names.size(); ++m)
            per_kernel.push_back(raw_input(loaded.model.ensembles()[m], inputs[m]));
        out.probabilities = loaded.model.predict_proba(per_kernel);
        out.class_labels = labels_or_indices(loaded.info.class_names, loaded.model.classes());
    }
    return out;
}

void write_predictions(const fs::path& path, const Prediction& p) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << "prediction";
    for (const auto& l : p.class_labels) out << ",p_" << l;
    out << '\n';
    const auto argmax = nn::argmax_rows(p.probabilities);
    for (Index i = 0; i < p.probabilities.rows(); ++i) {
        out << p.class_labels[static_cast<std::size_t>(argmax[static_cast<std::size_t>(i)])];
        for (Index j = 0; j < p.probabilities.cols(); ++j) out << ',' << io::format_double(p.probabilities(i, j));
        out << '\n';
    }
}

Outcome evaluate(const fs::path& dir, const fs::path& out, const Context& ctx) {
    const auto t0 = Clock::now();
    const bool single = bundle::bundle_kind(dir) == bundle::BundleKind::dkmo;
    std::optional<bundle::LoadedDkmo> dk;
    std::optional<bundle::LoadedMdkmo> mdk;
    if (single) {
        dk = bundle::load_dkmo(dir);
    } else {
        mdk = bundle::load_mdkmo(dir);
    }
    const bundle::BundleInfo& info = single ? dk->info : mdk->info;
    if (!info.config_json) throw IngestError(dir.string() + ": bundle has no config.json to evaluate against");
    const auto cfg = config::parse_config(*info.config_json);
    if (config::config_hash(cfg) != info.config_hash) {
        throw IngestError(dir.string() + ": config.json does not match the recorded config hash");
    }
    const Prepared p = prepare_data(cfg);
    require_test(p);
    const auto& test = p.dataset.split.test;
    Matrix proba;
    if (single) {
        const BoundKernel b = bind_kernel(p, cfg.kernel(dk->model.kernel_name()));
        proba = dk->model.predict_proba(b.input(test, needs_kernel_rows(dk->model.ensemble())));
    } else {
        std::vector<model::SampleInput> inputs;
        for (std::size_t m = 0; m < mdk->model.kernel_names().size(); ++m) {
            const BoundKernel b = bind_kernel(p, cfg.kernel(mdk->model.kernel_names()[m]));
            inputs.push_back(b.input(test, needs_kernel_rows(mdk->model.ensembles()[m])));
        }
        proba = mdk->model.predict_proba(inputs);
    }
    Outcome o = score(proba, p);
    o.seconds = elapsed(t0);
    metrics::write_metrics_json(out, run_info(single ? "dkmo" : "mdkmo", cfg, o.seconds), o.metrics);
    note(ctx, "test accuracy " + percent(o.metrics.accuracy) + " (macro " + percent(o.metrics.macro_accuracy) + ")");
    return o;
}

}  // namespace dkmo::experiment
