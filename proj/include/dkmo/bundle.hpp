#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dkmo/dkmo_model.hpp"
#include "dkmo/mdkmo.hpp"

// Model bundles: directories holding a checkpoint, embedding sidecars and a
// text manifest.
//
// DKMO bundle
//   manifest.txt        format, kernel, classes, class labels, merge, kernel
//                       dropout, member count, config hash, seed
//   model.ckpt          branch networks in member order, then the head
//                       (head omitted inside M-DKMO bundles)
//   member_<p>.meta     embedding description (kind, rank, columns or
//                       clustering method and kernel function)
//   member_<p>.bin      training embedding (n x r)
//   member_<p>.map      out-of-sample map
//   member_<p>.landmarks  landmark points (clustered members only)
//   config.json         canonical experiment config, when known
//
// M-DKMO bundle
//   manifest.txt        format, kernel names, global merge, kernel dropout,
//                       post-merge widths, classes, config hash, seed
//   kernel_<m>/         DKMO bundle of body m (no head)
//   global.ckpt         post-merge network, then the global head
//   config.json
namespace dkmo::bundle {

namespace fs = std::filesystem;

struct BundleInfo {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::vector<std::string> class_names;  // empty: "0", "1", ...
    std::optional<std::string> config_json;
};

enum class BundleKind { dkmo, mdkmo };
// Reads the manifest format line. Throws IngestError for anything else.
BundleKind bundle_kind(const fs::path& dir);

void save_dkmo(const fs::path& dir, const model::DkmoModel& model, const BundleInfo& info);
struct LoadedDkmo {
    model::DkmoModel model;
    BundleInfo info;
};
LoadedDkmo load_dkmo(const fs::path& dir);

void save_mdkmo(const fs::path& dir, const model::MdkmoModel& model, const BundleInfo& info);
struct LoadedMdkmo {
    model::MdkmoModel model;
    BundleInfo info;
};
LoadedMdkmo load_mdkmo(const fs::path& dir);

// Embedding ensemble sidecars alone (member_<p>.* files plus a manifest).
void save_ensemble(const fs::path& dir, const nystroem::EmbeddingEnsemble& ensemble);
nystroem::EmbeddingEnsemble load_ensemble(const fs::path& dir);

}  // namespace dkmo::bundle
