#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mwand/dedup.hpp"
#include "mwand/encode.hpp"
#include "mwand/retrieve.hpp"
#include "mwand/train.hpp"
#include "mwand/views.hpp"

namespace mwand {

struct PipelineConfig {
    std::vector<std::filesystem::path> inputs;
    std::filesystem::path out_dir = "out";
    ViewOptions views;
    DedupTolerances dedup;
    bool dedup_enabled = true;
    /// Pick each group's exemplar uniformly with this seed instead of the lowest part id.
    std::optional<std::uint64_t> random_exemplar_seed;
    /// "builtin" or "external:<dir>", where <dir> holds `<mesh>.json` / `<mesh>.bin` stores.
    std::string backend = "builtin";
    std::optional<std::filesystem::path> head_checkpoint;
    EmbeddingSpace space = EmbeddingSpace::x;
    bool dump_views = false;
    /// Also embed every part (not only exemplars) for training, with this many
    /// extra context viewpoints per part.
    bool training_data = false;
    int extra_views = 2;
    std::uint64_t seed = 0;
    int jobs = 1;

    /// Throws ConfigError. Checks files exist and `--space z` has a head.
    void validate() const;
};

/// Directory-safe mesh name derived from the input file stem.
std::string mesh_key(const std::filesystem::path& input);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception is rethrown.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

struct MeshArtifacts {
    std::string key;
    Mesh mesh;
    std::vector<Part> parts;
    DuplicateGroups groups;
    std::map<PartId, PartEmbedding> exemplar_x;
    std::map<PartId, std::vector<float>> exemplar_z;  // only with a head
    std::map<PartId, int> zoom_levels;
    /// PNG bytes per exemplar in (isolated, context, full) order, when requested.
    std::map<PartId, std::array<std::string, 3>> view_pngs;
    /// Training embeddings: (part, variant) for every part.
    std::map<std::pair<PartId, int>, PartEmbedding> training_x;

    EmbeddingIndex index(EmbeddingSpace space) const;
};

/// Stage names recorded in manifests.
inline constexpr const char* kStageLoad = "load";
inline constexpr const char* kStageSegment = "segment";
inline constexpr const char* kStageDedup = "dedup";
inline constexpr const char* kStageViews = "views";
inline constexpr const char* kStageEmbed = "embed";
inline constexpr const char* kStageProject = "project";
inline constexpr const char* kStageWrite = "write";

/// In-memory pipeline for one parsed mesh. `stage` tracks progress for error
/// reporting. `keep_pngs` retains encoded renders of every exemplar.
MeshArtifacts process_mesh(Mesh mesh, std::string key, const PipelineConfig& cfg, const ProjectionHead* head,
                           bool keep_pngs, std::string* stage = nullptr);

/// Writes one mesh's artifacts under `out_dir/<key>/` (views under
/// `out_dir/views/<key>/`) and returns its manifest.
nlohmann::json write_artifacts(const MeshArtifacts& art, const PipelineConfig& cfg);

/// Full batch run over cfg.inputs. Each mesh's manifest records status and,
/// on failure, the failed stage; the first failure is rethrown after its
/// manifest is written.
std::vector<nlohmann::json> run_pipeline(const PipelineConfig& cfg);

/// Reads groups and the x or z store written by write_artifacts.
EmbeddingIndex load_index(const std::filesystem::path& mesh_dir, EmbeddingSpace space = EmbeddingSpace::x);

/// Parts with their ground-truth materials as written in parts.json.
std::vector<Part> load_parts(const std::filesystem::path& mesh_dir);

/// Every `<dir>/<mesh>/` holding training embeddings, as a training corpus.
std::vector<CorpusMesh> load_training_corpus(const std::filesystem::path& data_dir);

/// Builds a corpus entry from in-memory artifacts with training embeddings.
CorpusMesh corpus_mesh(const MeshArtifacts& art);

}  // namespace mwand
