#include "dkmo/bundle.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "dkmo/checkpoint.hpp"
#include "dkmo/error.hpp"
#include "dkmo/matrix_io.hpp"

namespace dkmo::bundle {

namespace {

constexpr const char* kDkmoFormat = "dkmo-bundle-1";
constexpr const char* kMdkmoFormat = "mdkmo-bundle-1";
constexpr const char* kEnsembleFormat = "dkmo-ensemble-1";

using Fields = std::map<std::string, std::string>;

std::string number(double v) { return io::format_double(v); }

double parse_double(const std::string& s, const std::string& where) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw IngestError(where + ": bad number '" + s + "'");
    return v;
}

template <class T>
T parse_int(const std::string& s, const std::string& where) {
    T v{};
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw IngestError(where + ": bad integer '" + s + "'");
    return v;
}

template <class T>
std::string join(const std::vector<T>& items) {
    std::ostringstream os;
    for (std::size_t i = 0; i < items.size(); ++i) os << (i ? " " : "") << items[i];
    return os.str();
}

std::vector<std::string> split_words(const std::string& s) {
    std::istringstream is(s);
    std::vector<std::string> out;
    for (std::string w; is >> w;) out.push_back(w);
    return out;
}

// "key value..." per line.
void write_fields(const fs::path& path, const std::vector<std::pair<std::string, std::string>>& fields) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    for (const auto& [k, v] : fields) out << k << ' ' << v << '\n';
}

Fields read_fields(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError("cannot open " + path.string());
    Fields f;
    for (std::string line; std::getline(in, line);) {
        if (line.empty()) continue;
        const auto sp = line.find(' ');
        f[line.substr(0, sp)] = sp == std::string::npos ? "" : line.substr(sp + 1);
    }
    return f;
}

const std::string& field(const Fields& f, const std::string& key, const fs::path& path) {
    auto it = f.find(key);
    if (it == f.end()) throw IngestError(path.string() + ": missing field '" + key + "'");
    return it->second;
}

std::string member_stem(std::size_t p) { return "member_" + std::to_string(p); }

void save_member(const fs::path& dir, std::size_t p, const nystroem::DenseEmbedding& e) {
    const std::string stem = member_stem(p);
    std::vector<std::pair<std::string, std::string>> meta{{"kernel_name", e.kernel_name}};
    if (const auto* c = std::get_if<nystroem::ConventionalSource>(&e.source)) {
        meta.emplace_back("kind", "conventional");
        meta.emplace_back("rank", std::to_string(c->rank));
        meta.emplace_back("effective_rank", std::to_string(c->effective_rank));
        meta.emplace_back("columns", join(c->columns));
    } else {
        const auto& z = std::get<nystroem::ClusteredSource>(e.source);
        meta.emplace_back("kind", "clustered");
        meta.emplace_back("method", clustering::to_string(z.method));
        meta.emplace_back("seed", std::to_string(z.seed));
        meta.emplace_back("function", kernels::to_string(z.kernel.kind));
        meta.emplace_back("gamma", number(z.kernel.gamma));
        meta.emplace_back("normalized", z.kernel.normalized ? "1" : "0");
        io::write_matrix_binary(dir / (stem + ".landmarks"), z.landmarks);
    }
    meta.emplace_back("description", e.describe());
    write_fields(dir / (stem + ".meta"), meta);
    io::write_matrix_binary(dir / (stem + ".bin"), e.values);
    io::write_matrix_binary(dir / (stem + ".map"), e.map);
}

nystroem::DenseEmbedding load_member(const fs::path& dir, std::size_t p) {
    const std::string stem = member_stem(p);
    const fs::path meta_path = dir / (stem + ".meta");
    const Fields meta = read_fields(meta_path);
    nystroem::DenseEmbedding e;
    e.kernel_name = field(meta, "kernel_name", meta_path);
    e.values = io::read_matrix(dir / (stem + ".bin"));
    e.map = io::read_matrix(dir / (stem + ".map"));
    const std::string& kind = field(meta, "kind", meta_path);
    const std::string where = meta_path.string();
    if (kind == "conventional") {
        nystroem::ConventionalSource c;
        c.rank = parse_int<Eigen::Index>(field(meta, "rank", meta_path), where);
        c.effective_rank = parse_int<Eigen::Index>(field(meta, "effective_rank", meta_path), where);
        for (const auto& w : split_words(field(meta, "columns", meta_path))) c.columns.push_back(parse_int<Eigen::Index>(w, where));
        if (static_cast<Eigen::Index>(c.columns.size()) != e.map.rows()) throw IngestError(where + ": column count does not match the map");
        e.source = std::move(c);
    } else if (kind == "clustered") {
        nystroem::ClusteredSource z;
        z.method = clustering::cluster_method_from_string(field(meta, "method", meta_path));
        z.seed = parse_int<std::uint64_t>(field(meta, "seed", meta_path), where);
        z.kernel.kind = kernels::kernel_kind_from_string(field(meta, "function", meta_path));
        z.kernel.gamma = parse_double(field(meta, "gamma", meta_path), where);
        z.kernel.normalized = field(meta, "normalized", meta_path) == "1";
        z.landmarks = io::read_matrix(dir / (stem + ".landmarks"));
        if (z.landmarks.rows() != e.map.rows()) throw IngestError(where + ": landmark count does not match the map");
        e.source = std::move(z);
    } else {
        throw IngestError(where + ": unknown embedding kind '" + kind + "'");
    }
    if (e.map.cols() != e.values.cols()) throw IngestError(where + ": map width does not match the embedding");
    return e;
}

void save_members(const fs::path& dir, const nystroem::EmbeddingEnsemble& ensemble) {
    for (std::size_t p = 0; p < ensemble.members.size(); ++p) save_member(dir, p, ensemble.members[p]);
}

nystroem::EmbeddingEnsemble load_members(const fs::path& dir, std::size_t count) {
    nystroem::EmbeddingEnsemble e;
    for (std::size_t p = 0; p < count; ++p) e.members.push_back(load_member(dir, p));
    e.check();
    return e;
}

void write_config(const fs::path& dir, const BundleInfo& info) {
    if (!info.config_json) return;
    std::ofstream out(dir / "config.json", std::ios::binary);
    out << *info.config_json << '\n';
}

BundleInfo read_info(const fs::path& dir, const Fields& manifest) {
    BundleInfo info;
    const fs::path path = dir / "manifest.txt";
    info.config_hash = field(manifest, "config_hash", path);
    info.seed = parse_int<std::uint64_t>(field(manifest, "seed", path), path.string());
    info.class_names = split_words(field(manifest, "class_labels", path));
    std::ifstream in(dir / "config.json", std::ios::binary);
    if (in) {
        std::ostringstream s;
        s << in.rdbuf();
        info.config_json = s.str();
    }
    return info;
}

std::vector<std::string> class_labels(const BundleInfo& info, int classes) {
    if (!info.class_names.empty()) {
        if (static_cast<int>(info.class_names.size()) != classes) throw ConfigError("class name count does not match the classes");
        for (const auto& n : info.class_names)
            if (n.empty() || n.find_first_of(" \t\n") != std::string::npos) throw ConfigError("class names must be single words");
        return info.class_names;
    }
    std::vector<std::string> out;
    for (int c = 0; c < classes; ++c) out.push_back(std::to_string(c));
    return out;
}

void save_body(const fs::path& dir, const model::DkmoBody& body, const nystroem::EmbeddingEnsemble& ensemble,
               const std::string& kernel_name, int classes, const nn::Network* head, const BundleInfo& info) {
    fs::create_directories(dir);
    std::vector<nn::Network> nets = body.branches();
    if (head) nets.push_back(*head);
    nn::write_checkpoint(dir / "model.ckpt", nets);
    save_members(dir, ensemble);
    write_fields(dir / "manifest.txt", {{"format", kDkmoFormat},
                                        {"kernel", kernel_name},
                                        {"classes", std::to_string(classes)},
                                        {"class_labels", join(class_labels(info, classes))},
                                        {"merge", model::to_string(body.fusion().merge)},
                                        {"kernel_dropout", number(body.fusion().kernel_dropout)},
                                        {"members", std::to_string(ensemble.size())},
                                        {"head", head ? "1" : "0"},
                                        {"config_hash", info.config_hash},
                                        {"seed", std::to_string(info.seed)}});
    write_config(dir, info);
}

struct LoadedBody {
    model::DkmoBody body;
    nystroem::EmbeddingEnsemble ensemble;
    std::optional<nn::Network> head;
    std::string kernel_name;
    int classes = 0;
    BundleInfo info;
};

LoadedBody load_body(const fs::path& dir) {
    const fs::path path = dir / "manifest.txt";
    const Fields m = read_fields(path);
    if (field(m, "format", path) != kDkmoFormat) throw IngestError(path.string() + ": not a DKMO bundle");
    LoadedBody out;
    out.kernel_name = field(m, "kernel", path);
    out.classes = parse_int<int>(field(m, "classes", path), path.string());
    const auto members = parse_int<std::size_t>(field(m, "members", path), path.string());
    const bool with_head = field(m, "head", path) == "1";
    model::FusionConfig fusion;
    fusion.merge = model::merge_from_string(field(m, "merge", path));
    fusion.kernel_dropout = parse_double(field(m, "kernel_dropout", path), path.string());
    auto nets = nn::read_checkpoint(dir / "model.ckpt");
    if (nets.size() != members + (with_head ? 1 : 0)) {
        throw IngestError((dir / "model.ckpt").string() + ": network count does not match the manifest");
    }
    if (with_head) {
        out.head = std::move(nets.back());
        nets.pop_back();
    }
    out.ensemble = load_members(dir, members);
    out.body = model::DkmoBody(std::move(nets), fusion);
    out.info = read_info(dir, m);
    return out;
}

}  // namespace

BundleKind bundle_kind(const fs::path& dir) {
    const fs::path path = dir / "manifest.txt";
    const auto& format = field(read_fields(path), "format", path);
    if (format == kDkmoFormat) return BundleKind::dkmo;
    if (format == kMdkmoFormat) return BundleKind::mdkmo;
    throw IngestError(path.string() + ": unknown bundle format '" + format + "'");
}

void save_dkmo(const fs::path& dir, const model::DkmoModel& model, const BundleInfo& info) {
    save_body(dir, model.body(), model.ensemble(), model.kernel_name(), model.classes(), &model.head(), info);
}

LoadedDkmo load_dkmo(const fs::path& dir) {
    LoadedBody b = load_body(dir);
    if (!b.head) throw IngestError(dir.string() + ": bundle has no classifier head");
    model::DkmoModel m(std::move(b.ensemble), std::move(b.body), std::move(*b.head), b.classes, b.kernel_name);
    return {std::move(m), std::move(b.info)};
}

void save_mdkmo(const fs::path& dir, const model::MdkmoModel& model, const BundleInfo& info) {
    fs::create_directories(dir);
    for (Eigen::Index m = 0; m < model.kernel_count(); ++m) {
        const auto i = static_cast<std::size_t>(m);
        save_body(dir / ("kernel_" + std::to_string(m)), model.bodies()[i], model.ensembles()[i],
                  model.kernel_names()[i], model.classes(), nullptr, info);
    }
    const std::vector<nn::Network> global{model.post(), model.head()};
    nn::write_checkpoint(dir / "global.ckpt", global);
    const auto& g = model.fusion();
    write_fields(dir / "manifest.txt", {{"format", kMdkmoFormat},
                                        {"kernels", join(model.kernel_names())},
                                        {"classes", std::to_string(model.classes())},
                                        {"class_labels", join(class_labels(info, model.classes()))},
                                        {"merge", model::to_string(g.merge)},
                                        {"kernel_dropout", number(g.kernel_dropout)},
                                        {"hidden", join(g.hidden)},
                                        {"dropout", number(g.dropout)},
                                        {"config_hash", info.config_hash},
                                        {"seed", std::to_string(info.seed)}});
    write_config(dir, info);
}

LoadedMdkmo load_mdkmo(const fs::path& dir) {
    const fs::path path = dir / "manifest.txt";
    const Fields m = read_fields(path);
    if (field(m, "format", path) != kMdkmoFormat) throw IngestError(path.string() + ": not an M-DKMO bundle");
    const auto names = split_words(field(m, "kernels", path));
    model::GlobalFusionConfig g;
    g.merge = model::merge_from_string(field(m, "merge", path));
    g.kernel_dropout = parse_double(field(m, "kernel_dropout", path), path.string());
    for (const auto& w : split_words(field(m, "hidden", path))) g.hidden.push_back(parse_int<Eigen::Index>(w, path.string()));
    g.dropout = parse_double(field(m, "dropout", path), path.string());
    const int classes = parse_int<int>(field(m, "classes", path), path.string());
    std::vector<model::DkmoBody> bodies;
    std::vector<nystroem::EmbeddingEnsemble> ensembles;
    for (std::size_t i = 0; i < names.size(); ++i) {
        LoadedBody b = load_body(dir / ("kernel_" + std::to_string(i)));
        if (b.kernel_name != names[i]) throw IngestError(path.string() + ": kernel order does not match kernel_" + std::to_string(i));
        bodies.push_back(std::move(b.body));
        ensembles.push_back(std::move(b.ensemble));
    }
    auto global = nn::read_checkpoint(dir / "global.ckpt");
    if (global.size() != 2) throw IngestError((dir / "global.ckpt").string() + ": expected two networks");
    model::MdkmoModel model(std::move(bodies), std::move(ensembles), names, g, std::move(global[0]),
                            std::move(global[1]), classes);
    return {std::move(model), read_info(dir, m)};
}

void save_ensemble(const fs::path& dir, const nystroem::EmbeddingEnsemble& ensemble) {
    fs::create_directories(dir);
    save_members(dir, ensemble);
    write_fields(dir / "manifest.txt", {{"format", kEnsembleFormat}, {"members", std::to_string(ensemble.size())}});
}

nystroem::EmbeddingEnsemble load_ensemble(const fs::path& dir) {
    const fs::path path = dir / "manifest.txt";
    const Fields m = read_fields(path);
    if (field(m, "format", path) != kEnsembleFormat) throw IngestError(path.string() + ": not an ensemble directory");
    return load_members(dir, parse_int<std::size_t>(field(m, "members", path), path.string()));
}

}  // namespace dkmo::bundle
