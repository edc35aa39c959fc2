#include "dkmo/config.hpp"

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "dkmo/error.hpp"
#include "dkmo/random.hpp"

namespace dkmo::config {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string to_string(KernelType t) {
    switch (t) {
        case KernelType::rbf: return "rbf";
        case KernelType::exp_chi2: return "exp_chi2";
        case KernelType::linear: return "linear";
        case KernelType::precomputed: return "precomputed";
        case KernelType::exp_distance: return "exp_distance";
    }
    return "?";
}

KernelType kernel_type_from_string(const std::string& s) {
    for (auto t : {KernelType::rbf, KernelType::exp_chi2, KernelType::linear, KernelType::precomputed,
                   KernelType::exp_distance})
        if (to_string(t) == s) return t;
    throw ConfigError("unknown kernel type '" + s + "'");
}

const KernelSpec& ExperimentConfig::kernel(const std::string& name) const {
    for (const auto& k : kernels)
        if (k.name == name) return k;
    throw ConfigError("no kernel named '" + name + "'");
}

const KernelSpec& ExperimentConfig::single_kernel() const {
    if (kernels.empty()) throw ConfigError("no kernels configured");
    return train_kernel ? kernel(*train_kernel) : kernels.front();
}

namespace {

// Strict view of one JSON object: every key must be listed, every read is
// type-checked and reported with its full path.
class Reader {
public:
    Reader(const json& j, std::string where, std::initializer_list<const char*> allowed) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
        for (const auto& [key, value] : j_.items()) {
            bool known = false;
            for (const char* a : allowed) known = known || key == a;
            if (!known) throw ConfigError("unknown key '" + path(key) + "'");
        }
    }

    bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }
    const json& at(const char* key) const { return j_.at(key); }
    std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

    template <class T>
    T get(const char* key, T fallback) const {
        if (!has(key)) return fallback;
        return as<T>(j_.at(key), path(key));
    }

    template <class T>
    T required(const char* key) const {
        if (!has(key)) throw ConfigError("missing key '" + path(key) + "'");
        return as<T>(j_.at(key), path(key));
    }

    template <class T>
    static T as(const json& v, const std::string& where) {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(where + " must be a boolean");
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw ConfigError(where + " must be an integer");
            if constexpr (std::is_unsigned_v<T>) {
                if (v.is_number_integer() && !v.is_number_unsigned()) throw ConfigError(where + " must be non-negative");
            }
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError(where + " must be a number");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError(where + " must be a string");
        }
        return v.get<T>();
    }

private:
    const json& j_;
    std::string where_;
};

std::vector<Index> widths(const json& v, const std::string& where) {
    if (!v.is_array()) throw ConfigError(where + " must be an array of widths");
    std::vector<Index> out;
    for (const auto& e : v) {
        const auto w = Reader::as<long long>(e, where);
        if (w <= 0) throw ConfigError(where + " widths must be positive");
        out.push_back(static_cast<Index>(w));
    }
    return out;
}

fs::path resolve(const fs::path& p, const fs::path& base) {
    if (p.is_absolute() || base.empty()) return p;
    return fs::absolute(base / p).lexically_normal();
}

void check_rate(double r, const std::string& where) {
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError(where + " must lie in [0, 1)");
}

nn::TrainConfig parse_train(const json& j, const std::string& where, nn::TrainConfig t) {
    Reader r(j, where, {"epochs", "batch_size", "learning_rate", "beta1", "beta2", "epsilon", "patience",
                        "val_fraction"});
    t.epochs = r.get("epochs", t.epochs);
    t.batch_size = r.get<long long>("batch_size", t.batch_size);
    t.adam.lr = r.get("learning_rate", t.adam.lr);
    t.adam.beta1 = r.get("beta1", t.adam.beta1);
    t.adam.beta2 = r.get("beta2", t.adam.beta2);
    t.adam.epsilon = r.get("epsilon", t.adam.epsilon);
    t.patience = r.get("patience", t.patience);
    t.val_fraction = r.get("val_fraction", t.val_fraction);
    if (t.epochs < 0) throw ConfigError(r.path("epochs") + " must be non-negative");
    if (t.batch_size < 1) throw ConfigError(r.path("batch_size") + " must be positive");
    if (!(t.adam.lr > 0.0)) throw ConfigError(r.path("learning_rate") + " must be positive");
    if (t.patience < 0) throw ConfigError(r.path("patience") + " must be non-negative");
    if (!(t.val_fraction >= 0.0 && t.val_fraction < 1.0)) throw ConfigError(r.path("val_fraction") + " must lie in [0, 1)");
    return t;
}

json dump_train(const nn::TrainConfig& t) {
    return json{{"epochs", t.epochs},          {"batch_size", t.batch_size}, {"learning_rate", t.adam.lr},
                {"beta1", t.adam.beta1},       {"beta2", t.adam.beta2},     {"epsilon", t.adam.epsilon},
                {"patience", t.patience},      {"val_fraction", t.val_fraction}};
}

data::FileSpec parse_file(const json& j, const std::string& where, const fs::path& base, bool table) {
    Reader r(j, where, table ? std::initializer_list<const char*>{"name", "path", "type"}
                             : std::initializer_list<const char*>{"name", "path"});
    data::FileSpec f;
    f.name = r.required<std::string>("name");
    f.path = resolve(r.required<std::string>("path"), base);
    if (table) f.kind = data::table_kind_from_string(r.required<std::string>("type"));
    return f;
}

SyntheticSpec parse_synthetic(const json& j) {
    Reader r(j, "data.synthetic",
             {"kind", "classes", "samples", "sigma", "separation", "dim", "noise", "views", "core", "radius",
              "nuisance", "seed"});
    SyntheticSpec s;
    s.kind = r.required<std::string>("kind");
    if (s.kind == "blobs") {
        s.blobs.classes = r.get("classes", s.blobs.classes);
        s.blobs.samples = r.get<long long>("samples", s.blobs.samples);
        s.blobs.sigma = r.get("sigma", s.blobs.sigma);
        s.blobs.separation = r.get("separation", s.blobs.separation);
        s.blobs.dim = r.get<long long>("dim", s.blobs.dim);
    } else if (s.kind == "rings") {
        s.rings.classes = r.get("classes", s.rings.classes);
        s.rings.samples = r.get<long long>("samples", s.rings.samples);
        s.rings.noise = r.get("noise", s.rings.noise);
    } else if (s.kind == "multiview") {
        auto& m = s.multiview;
        m.classes = r.get("classes", m.classes);
        m.views = r.get("views", m.views);
        m.samples = r.get<long long>("samples", m.samples);
        m.core = r.get("core", m.core);
        m.radius = r.get("radius", m.radius);
        m.noise = r.get("noise", m.noise);
        m.nuisance = r.get<long long>("nuisance", m.nuisance);
    } else {
        throw ConfigError("data.synthetic.kind must be blobs, rings or multiview");
    }
    if (r.has("seed")) s.seed = r.get<std::uint64_t>("seed", 0);
    return s;
}

json dump_synthetic(const SyntheticSpec& s) {
    json j{{"kind", s.kind}};
    if (s.kind == "blobs") {
        j.update(json{{"classes", s.blobs.classes}, {"samples", s.blobs.samples}, {"sigma", s.blobs.sigma},
                      {"separation", s.blobs.separation}, {"dim", s.blobs.dim}});
    } else if (s.kind == "rings") {
        j.update(json{{"classes", s.rings.classes}, {"samples", s.rings.samples}, {"noise", s.rings.noise}});
    } else {
        const auto& m = s.multiview;
        j.update(json{{"classes", m.classes}, {"views", m.views}, {"samples", m.samples}, {"core", m.core},
                      {"radius", m.radius}, {"noise", m.noise}, {"nuisance", m.nuisance}});
    }
    if (s.seed) j["seed"] = *s.seed;
    return j;
}

DataSpec parse_data(const json& j, const fs::path& base) {
    Reader r(j, "data", {"labels", "features", "tables", "synthetic", "split", "class_names"});
    DataSpec d;
    if (r.has("synthetic")) {
        if (r.has("labels") || r.has("features") || r.has("tables")) {
            throw ConfigError("data: synthetic data cannot be combined with files");
        }
        d.synthetic = parse_synthetic(r.at("synthetic"));
    } else {
        data::DatasetFiles files;
        files.labels = resolve(r.required<std::string>("labels"), base);
        auto list = [&](const char* key, bool table, std::vector<data::FileSpec>& out) {
            if (!r.has(key)) return;
            if (!r.at(key).is_array()) throw ConfigError(r.path(key) + " must be an array");
            std::size_t i = 0;
            for (const auto& e : r.at(key)) out.push_back(parse_file(e, r.path(key) + "[" + std::to_string(i++) + "]", base, table));
        };
        list("features", false, files.features);
        list("tables", true, files.tables);
        if (files.features.empty() && files.tables.empty()) throw ConfigError("data needs features or tables");
        d.files = std::move(files);
    }
    d.split.fraction = 0.5;
    if (r.has("split")) {
        Reader s(r.at("split"), "data.split", {"fraction", "per_class", "stratify"});
        if (s.has("fraction") && s.has("per_class")) throw ConfigError("data.split: give fraction or per_class, not both");
        if (s.has("per_class")) {
            d.split.fraction.reset();
            d.split.per_class = s.get<long long>("per_class", 0);
        } else {
            d.split.fraction = s.get("fraction", 0.5);
        }
        d.split.stratify = s.get("stratify", true);
    }
    if (r.has("class_names")) {
        for (const auto& e : r.at("class_names")) d.class_names.push_back(Reader::as<std::string>(e, "data.class_names"));
    }
    return d;
}

json dump_data(const DataSpec& d) {
    json j = json::object();
    if (d.synthetic) {
        j["synthetic"] = dump_synthetic(*d.synthetic);
    } else if (d.files) {
        j["labels"] = d.files->labels.string();
        json f = json::array(), t = json::array();
        for (const auto& e : d.files->features) f.push_back({{"name", e.name}, {"path", e.path.string()}});
        for (const auto& e : d.files->tables)
            t.push_back({{"name", e.name}, {"path", e.path.string()}, {"type", data::to_string(*e.kind)}});
        j["features"] = f;
        j["tables"] = t;
    }
    json split{{"stratify", d.split.stratify}};
    if (d.split.per_class) {
        split["per_class"] = *d.split.per_class;
    } else {
        split["fraction"] = d.split.fraction.value_or(0.5);
    }
    j["split"] = split;
    j["class_names"] = d.class_names;
    return j;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const fs::path& base_dir) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    Reader r(root, "", {"data", "kernels", "train_kernel", "embedding", "network", "fusion", "training",
                        "global_fusion", "finetune", "baseline", "seed", "threads", "output"});
    ExperimentConfig c;
    c.data = parse_data(r.has("data") ? r.at("data") : throw ConfigError("missing key 'data'"), base_dir);

    if (!r.has("kernels") || !r.at("kernels").is_array() || r.at("kernels").empty()) {
        throw ConfigError("'kernels' must be a non-empty array");
    }
    std::size_t i = 0;
    for (const auto& e : r.at("kernels")) {
        const std::string where = "kernels[" + std::to_string(i++) + "]";
        Reader k(e, where, {"name", "source", "type", "gamma"});
        KernelSpec spec;
        spec.source = k.required<std::string>("source");
        spec.name = k.get("name", spec.source);
        spec.type = kernel_type_from_string(k.get<std::string>("type", "rbf"));
        if (k.has("gamma")) {
            const auto& g = k.at("gamma");
            if (g.is_string()) {
                if (g.get<std::string>() != "auto") throw ConfigError(k.path("gamma") + " must be a number or \"auto\"");
            } else {
                spec.gamma = Reader::as<double>(g, k.path("gamma"));
                if (!(*spec.gamma > 0.0)) throw ConfigError(k.path("gamma") + " must be positive");
            }
        }
        if (spec.name.empty() || spec.name.find_first_of(" \t\n/") != std::string::npos) {
            throw ConfigError(k.path("name") + " must be a non-empty word without '/'");
        }
        for (const auto& other : c.kernels)
            if (other.name == spec.name) throw ConfigError("duplicate kernel name '" + spec.name + "'");
        c.kernels.push_back(std::move(spec));
    }
    if (r.has("train_kernel")) {
        c.train_kernel = r.get<std::string>("train_kernel", "");
        (void)c.kernel(*c.train_kernel);
    }

    if (r.has("embedding")) {
        Reader e(r.at("embedding"), "embedding", {"kind", "rank", "schedule", "max_iterations", "k_neighbors"});
        const auto kind = e.get<std::string>("kind", "automatic");
        using Kind = model::EmbeddingPlan::Kind;
        if (kind == "automatic") c.embedding.kind = Kind::automatic;
        else if (kind == "clustered") c.embedding.kind = Kind::clustered;
        else if (kind == "conventional") c.embedding.kind = Kind::conventional;
        else throw ConfigError("embedding.kind must be automatic, clustered or conventional");
        c.embedding.rank = e.get<long long>("rank", c.embedding.rank);
        if (c.embedding.rank < 1) throw ConfigError("embedding.rank must be positive");
        if (e.has("schedule")) {
            for (const auto& pair : e.at("schedule")) {
                if (!pair.is_array() || pair.size() != 2) throw ConfigError("embedding.schedule entries must be [s, r]");
                const auto s = Reader::as<long long>(pair[0], "embedding.schedule");
                const auto rr = Reader::as<long long>(pair[1], "embedding.schedule");
                if (s < 1 || rr < 1 || rr > s) throw ConfigError("embedding.schedule needs 1 <= r <= s");
                c.embedding.schedule.emplace_back(s, rr);
            }
        }
        c.embedding.clustering.max_iterations = e.get("max_iterations", c.embedding.clustering.max_iterations);
        if (e.has("k_neighbors")) c.embedding.clustering.k_neighbors = e.get<long long>("k_neighbors", 10);
    }

    if (r.has("network")) {
        Reader n(r.at("network"), "network", {"hidden", "dropout", "batch_norm", "bn_momentum"});
        if (n.has("hidden")) c.dkmo.branch.hidden = widths(n.at("hidden"), "network.hidden");
        c.dkmo.branch.dropout = n.get("dropout", c.dkmo.branch.dropout);
        c.dkmo.branch.batch_norm = n.get("batch_norm", c.dkmo.branch.batch_norm);
        c.dkmo.branch.bn_momentum = n.get("bn_momentum", c.dkmo.branch.bn_momentum);
        check_rate(c.dkmo.branch.dropout, "network.dropout");
        check_rate(c.dkmo.branch.bn_momentum, "network.bn_momentum");
    }
    if (r.has("fusion")) {
        Reader f(r.at("fusion"), "fusion", {"merge", "kernel_dropout"});
        c.dkmo.fusion.merge = model::merge_from_string(f.get<std::string>("merge", "sum"));
        c.dkmo.fusion.kernel_dropout = f.get("kernel_dropout", c.dkmo.fusion.kernel_dropout);
        check_rate(c.dkmo.fusion.kernel_dropout, "fusion.kernel_dropout");
    }
    if (r.has("training")) c.dkmo.train = parse_train(r.at("training"), "training", c.dkmo.train);
    if (r.has("global_fusion")) {
        Reader g(r.at("global_fusion"), "global_fusion", {"merge", "kernel_dropout", "hidden", "dropout"});
        c.global_fusion.merge = model::merge_from_string(g.get<std::string>("merge", "sum"));
        c.global_fusion.kernel_dropout = g.get("kernel_dropout", c.global_fusion.kernel_dropout);
        if (g.has("hidden")) c.global_fusion.hidden = widths(g.at("hidden"), "global_fusion.hidden");
        c.global_fusion.dropout = g.get("dropout", c.global_fusion.dropout);
        check_rate(c.global_fusion.kernel_dropout, "global_fusion.kernel_dropout");
        check_rate(c.global_fusion.dropout, "global_fusion.dropout");
    }
    c.finetune.epochs = 100;
    if (r.has("finetune")) c.finetune = parse_train(r.at("finetune"), "finetune", c.finetune);
    if (r.has("baseline")) {
        Reader b(r.at("baseline"), "baseline", {"rank", "training"});
        c.baseline.rank = b.get<long long>("rank", c.baseline.rank);
        if (c.baseline.rank < 1) throw ConfigError("baseline.rank must be positive");
        if (b.has("training")) c.baseline.train = parse_train(b.at("training"), "baseline.training", c.baseline.train);
    }
    c.seed = r.get<std::uint64_t>("seed", 0);
    c.threads = r.get("threads", 1);
    if (c.threads < 1) throw ConfigError("threads must be positive");
    if (r.has("output")) c.output = resolve(r.get<std::string>("output", ""), base_dir);
    return c;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    try {
        return parse_config(text.str(), fs::absolute(path).parent_path());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string dump_config(const ExperimentConfig& c) {
    json root;
    root["data"] = dump_data(c.data);
    json ks = json::array();
    for (const auto& k : c.kernels) {
        json e{{"name", k.name}, {"source", k.source}, {"type", to_string(k.type)}};
        if (k.gamma) {
            e["gamma"] = *k.gamma;
        } else {
            e["gamma"] = "auto";
        }
        ks.push_back(e);
    }
    root["kernels"] = ks;
    if (c.train_kernel) root["train_kernel"] = *c.train_kernel;
    const char* kind = c.embedding.kind == model::EmbeddingPlan::Kind::automatic   ? "automatic"
                       : c.embedding.kind == model::EmbeddingPlan::Kind::clustered ? "clustered"
                                                                                  : "conventional";
    json schedule = json::array();
    for (const auto& [s, r] : c.embedding.schedule) schedule.push_back({s, r});
    root["embedding"] = {{"kind", kind},
                         {"rank", c.embedding.rank},
                         {"schedule", schedule},
                         {"max_iterations", c.embedding.clustering.max_iterations}};
    if (c.embedding.clustering.k_neighbors) root["embedding"]["k_neighbors"] = *c.embedding.clustering.k_neighbors;
    root["network"] = {{"hidden", c.dkmo.branch.hidden},
                       {"dropout", c.dkmo.branch.dropout},
                       {"batch_norm", c.dkmo.branch.batch_norm},
                       {"bn_momentum", c.dkmo.branch.bn_momentum}};
    root["fusion"] = {{"merge", model::to_string(c.dkmo.fusion.merge)}, {"kernel_dropout", c.dkmo.fusion.kernel_dropout}};
    root["training"] = dump_train(c.dkmo.train);
    root["global_fusion"] = {{"merge", model::to_string(c.global_fusion.merge)},
                             {"kernel_dropout", c.global_fusion.kernel_dropout},
                             {"hidden", c.global_fusion.hidden},
                             {"dropout", c.global_fusion.dropout}};
    root["finetune"] = dump_train(c.finetune);
    root["baseline"] = {{"rank", c.baseline.rank}, {"training", dump_train(c.baseline.train)}};
    root["seed"] = c.seed;
    root["threads"] = c.threads;
    if (c.output) root["output"] = c.output->string();
    return root.dump(2);
}

std::string config_hash(const ExperimentConfig& c) {
    // Thread count and output location do not affect results.
    ExperimentConfig canonical = c;
    canonical.threads = 1;
    canonical.output.reset();
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(dump_config(canonical))));
    return buf;
}

}  // namespace dkmo::config
