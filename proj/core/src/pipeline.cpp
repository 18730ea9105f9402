#include "mwand/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include "mwand/errors.hpp"
#include "mwand/io.hpp"
#include "mwand/mesh.hpp"
#include "mwand/raster.hpp"

namespace mwand {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kExternalPrefix = "external:";

bool is_external(const std::string& backend) { return backend.rfind(kExternalPrefix, 0) == 0; }

fs::path external_dir(const std::string& backend) { return backend.substr(kExternalPrefix.size()); }

std::string png_string(const FrameBuffer& fb) {
    const auto bytes = encode_png(fb);
    return {bytes.begin(), bytes.end()};
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<StoreEntry> split_views(PartId part, int variant, const std::vector<float>& x, int view_dim) {
    static const std::array<std::string, 3> names{"isolated", "context", "full"};
    std::vector<StoreEntry> out;
    for (std::size_t v = 0; v < names.size(); ++v) {
        const auto begin = x.begin() + static_cast<std::ptrdiff_t>(v * static_cast<std::size_t>(view_dim));
        out.push_back({part, names[v], variant, std::vector<float>(begin, begin + view_dim)});
    }
    return out;
}

}  // namespace

void PipelineConfig::validate() const {
    if (inputs.empty()) throw ConfigError("no input meshes given");
    for (const auto& p : inputs) {
        if (!fs::is_regular_file(p)) throw ConfigError("input mesh not found: " + p.string());
    }
    if (backend != "builtin" && !is_external(backend)) {
        throw ConfigError("unknown backend '" + backend + "' (expected builtin or external:<dir>)");
    }
    if (is_external(backend) && !fs::is_directory(external_dir(backend))) {
        throw ConfigError("external embedding directory not found: " + external_dir(backend).string());
    }
    if (space == EmbeddingSpace::z && !head_checkpoint) throw ConfigError("--space z requires a head checkpoint");
    if (head_checkpoint && !fs::is_regular_file(*head_checkpoint)) {
        throw ConfigError("head checkpoint not found: " + head_checkpoint->string());
    }
    if (views.resolution < 8) throw ConfigError("render resolution must be at least 8");
    if (views.candidates < 1) throw ConfigError("need at least one view candidate");
    if (!(views.fov_deg > 0.0 && views.fov_deg < 180.0)) throw ConfigError("field of view must lie in (0, 180)");
    if (!(views.occlusion_threshold >= 0.0 && views.occlusion_threshold <= 1.0)) {
        throw ConfigError("occlusion threshold must lie in [0, 1]");
    }
    if (dedup.bins < 1) throw ConfigError("dedup bins must be positive");
    if (extra_views < 0) throw ConfigError("extra views must be non-negative");
    if (jobs < 1) throw ConfigError("jobs must be at least 1");
}

std::string mesh_key(const fs::path& input) {
    auto key = input.stem().string();
    for (auto& c : key) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
    }
    return key.empty() ? "mesh" : key;
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    const auto work = [&] {
        for (;;) {
            const auto i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next = n;
            }
        }
    };
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < workers; ++t) threads.emplace_back(work);
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);
}

EmbeddingIndex MeshArtifacts::index(EmbeddingSpace space) const {
    std::map<PartId, std::vector<float>> vectors;
    if (space == EmbeddingSpace::z) {
        if (exemplar_z.empty() && !exemplar_x.empty()) throw ConfigError("z-space index requires a projection head");
        vectors = exemplar_z;
    } else {
        for (const auto& [pid, e] : exemplar_x) vectors[pid] = e.x;
    }
    return EmbeddingIndex(key, groups, std::move(vectors), space);
}

MeshArtifacts process_mesh(Mesh mesh, std::string key, const PipelineConfig& cfg, const ProjectionHead* head,
                           bool keep_pngs, std::string* stage) {
    const auto enter = [&](const char* s) {
        if (stage) *stage = s;
    };
    MeshArtifacts art;
    art.key = std::move(key);

    enter(kStageSegment);
    art.mesh = merge_vertices(mesh);
    art.parts = assign_part_materials(art.mesh, connected_components(art.mesh));

    enter(kStageDedup);
    art.groups = cfg.dedup_enabled ? group_duplicates(art.parts, art.mesh, cfg.dedup) : singleton_groups(art.parts.size());
    if (cfg.random_exemplar_seed) art.groups = choose_random_exemplars(std::move(art.groups), *cfg.random_exemplar_seed);

    std::vector<PartId> exemplars;
    for (const auto& g : art.groups.groups) exemplars.push_back(g.exemplar);

    const RenderScene scene(art.mesh, art.parts);
    const BuiltinBackend builtin;
    const bool external = is_external(cfg.backend);
    const bool render = !external || keep_pngs || cfg.dump_views || cfg.training_data;

    enter(kStageViews);
    if (external) {
        const auto dir = external_dir(cfg.backend);
        auto loaded = load_external_embeddings(dir / (art.key + ".json"), dir / (art.key + ".bin"));
        for (const auto pid : exemplars) {
            auto it = loaded.find(pid);
            if (it == loaded.end()) throw FormatError("external store lacks exemplar part " + std::to_string(pid));
            art.exemplar_x[pid] = std::move(it->second);
        }
    }
    if (render) {
        const bool want_png = keep_pngs || cfg.dump_views;
        std::vector<PartId> targets;
        if (cfg.training_data) {
            for (const auto& p : art.parts) targets.push_back(p.part_id);
        } else {
            targets = exemplars;
        }
        const int variants = cfg.training_data ? 1 + cfg.extra_views : 1;
        std::vector<std::vector<PartEmbedding>> embedded(targets.size());
        std::vector<std::array<std::string, 3>> pngs(targets.size());
        std::vector<int> zooms(targets.size(), 0);
        parallel_for(targets.size(), cfg.jobs, [&](std::size_t i) {
            const auto& part = scene.part(targets[i]);
            const auto selection = select_context_view(scene, part, cfg.views);
            zooms[i] = selection.zoom_level;
            for (int v = 0; v < variants; ++v) {
                const auto vs = render_view_set(scene, part, selection, cfg.views, v);
                embedded[i].push_back(embed_part(vs, builtin));
                if (v == 0 && want_png && art.groups.is_exemplar(part.part_id)) {
                    pngs[i] = {png_string(vs.isolated), png_string(vs.context), png_string(vs.full)};
                }
            }
        });
        enter(kStageEmbed);
        for (std::size_t i = 0; i < targets.size(); ++i) {
            const auto pid = targets[i];
            const bool is_ex = art.groups.is_exemplar(pid);
            if (is_ex) {
                art.zoom_levels[pid] = zooms[i];
                if (!external) art.exemplar_x[pid] = embedded[i][0];
                if (want_png) art.view_pngs[pid] = std::move(pngs[i]);
            }
            if (cfg.training_data) {
                for (std::size_t v = 0; v < embedded[i].size(); ++v) {
                    art.training_x[{pid, static_cast<int>(v)}] = embedded[i][v];
                }
            }
        }
    }

    enter(kStageProject);
    if (head) {
        for (const auto& [pid, e] : art.exemplar_x) {
            if (static_cast<int>(e.x.size()) != head->input_dim()) {
                throw ConfigError("head expects input width " + std::to_string(head->input_dim()) + ", embeddings have " +
                                  std::to_string(e.x.size()));
            }
            const auto z = project(e, *head);
            art.exemplar_z[pid] = std::vector<float>(z.z.begin(), z.z.end());
        }
    }
    return art;
}

nlohmann::json write_artifacts(const MeshArtifacts& art, const PipelineConfig& cfg) {
    const auto dir = cfg.out_dir / art.key;
    fs::create_directories(dir);
    nlohmann::json files = nlohmann::json::object();
    const auto record = [&](const fs::path& path) {
        const auto bytes = read_file(path);
        files[fs::relative(path, cfg.out_dir).generic_string()] = {{"sha256", sha256_hex(bytes)}, {"bytes", bytes.size()}};
    };

    write_json(dir / "mesh.json", mesh_snapshot_json(art.mesh, art.parts));
    record(dir / "mesh.json");

    auto parts = nlohmann::json::array();
    for (const auto& p : art.parts) {
        auto j = part_to_json(p);
        j["group"] = art.groups.group_index(p.part_id);
        j["exemplar"] = art.groups.exemplar_of(p.part_id);
        parts.push_back(std::move(j));
    }
    write_json(dir / "parts.json", parts);
    record(dir / "parts.json");

    write_json(dir / "groups.json", groups_to_json(art.groups));
    record(dir / "groups.json");

    std::vector<PartEmbedding> xs;
    for (const auto& [pid, e] : art.exemplar_x) xs.push_back(e);
    const int view_dim = xs.empty() ? kViewFeatureDim : static_cast<int>(xs.front().x.size() / 3);
    write_embedding_store(dir / "embeddings.json", dir / "embeddings.bin", xs, {}, view_dim);
    record(dir / "embeddings.json");
    record(dir / "embeddings.bin");

    if (!art.exemplar_z.empty()) {
        std::vector<StoreEntry> zs;
        for (const auto& [pid, z] : art.exemplar_z) zs.push_back({pid, "z", 0, z});
        write_vector_store(dir / "z.json", dir / "z.bin", static_cast<int>(zs.front().values.size()), zs);
        record(dir / "z.json");
        record(dir / "z.bin");
    }

    if (!art.training_x.empty()) {
        std::vector<StoreEntry> entries;
        for (const auto& [key, e] : art.training_x) {
            auto split = split_views(key.first, key.second, e.x, view_dim);
            entries.insert(entries.end(), split.begin(), split.end());
        }
        write_vector_store(dir / "train.json", dir / "train.bin", view_dim, entries,
                           {{"views", {"isolated", "context", "full"}}});
        record(dir / "train.json");
        record(dir / "train.bin");
    }

    const auto space = art.exemplar_z.empty() ? EmbeddingSpace::x : cfg.space;
    const auto index = art.index(space);
    std::string csv = "query,rank,part_id,distance\n";
    for (const auto& g : art.groups.groups) {
        const auto ranking = rank_parts(index, g.exemplar);
        for (std::size_t r = 0; r < ranking.size(); ++r) {
            csv += std::to_string(g.exemplar) + ',' + std::to_string(r + 1) + ',' + std::to_string(ranking[r].part_id) +
                   ',' + format_double(ranking[r].distance) + '\n';
        }
    }
    write_file(dir / "rankings.csv", csv);
    record(dir / "rankings.csv");

    if (cfg.dump_views) {
        static const std::array<const char*, 3> roles{"isolated", "context", "full"};
        for (const auto& [pid, pngs] : art.view_pngs) {
            for (std::size_t r = 0; r < roles.size(); ++r) {
                const auto path = cfg.out_dir / "views" / art.key / std::to_string(pid) / (std::string(roles[r]) + ".png");
                write_file(path, pngs[r]);
                record(path);
            }
        }
    }

    nlohmann::json manifest;
    manifest["mesh"] = art.key;
    manifest["status"] = "ok";
    manifest["parts"] = art.parts.size();
    manifest["exemplars"] = art.groups.groups.size();
    manifest["space"] = std::string(to_string(space));
    manifest["backend"] = cfg.backend;
    manifest["config"] = {{"resolution", cfg.views.resolution},
                          {"candidates", cfg.views.candidates},
                          {"fov_deg", cfg.views.fov_deg},
                          {"occlusion_threshold", cfg.views.occlusion_threshold},
                          {"dedup", cfg.dedup_enabled},
                          {"dedup_bins", cfg.dedup.bins},
                          {"dedup_l1", cfg.dedup.histogram_l1},
                          {"dedup_scale_tol", cfg.dedup.scale},
                          {"dedup_count_tol", cfg.dedup.vertex_count},
                          {"seed", cfg.seed}};
    manifest["artifacts"] = std::move(files);
    write_json(dir / "manifest.json", manifest);
    return manifest;
}

std::vector<nlohmann::json> run_pipeline(const PipelineConfig& cfg) {
    cfg.validate();
    std::optional<ProjectionHead> head;
    if (cfg.head_checkpoint) head = load_head(*cfg.head_checkpoint);
    std::vector<nlohmann::json> manifests;
    for (const auto& input : cfg.inputs) {
        const auto key = mesh_key(input);
        std::string stage = kStageLoad;
        try {
            auto mesh = load_obj_file(input);
            auto art = process_mesh(std::move(mesh), key, cfg, head ? &*head : nullptr, false, &stage);
            stage = kStageWrite;
            auto manifest = write_artifacts(art, cfg);
            manifest["source_sha256"] = sha256_file(input);
            write_json(cfg.out_dir / key / "manifest.json", manifest);
            manifests.push_back(std::move(manifest));
        } catch (const std::exception& e) {
            const nlohmann::json manifest{{"mesh", key}, {"status", "failed"}, {"failed_stage", stage}, {"error", e.what()}};
            write_json(cfg.out_dir / key / "manifest.json", manifest);
            throw;
        }
    }
    return manifests;
}

std::vector<Part> load_parts(const fs::path& mesh_dir) {
    const auto j = read_json(mesh_dir / "parts.json");
    if (!j.is_array()) throw FormatError("parts.json must be an array");
    std::vector<Part> parts;
    for (const auto& p : j) parts.push_back(part_from_json(p));
    return parts;
}

EmbeddingIndex load_index(const fs::path& mesh_dir, EmbeddingSpace space) {
    if (!fs::is_directory(mesh_dir)) throw NotFoundError("no artifacts at " + mesh_dir.string());
    const auto parts = read_json(mesh_dir / "parts.json");
    auto groups = groups_from_json(read_json(mesh_dir / "groups.json"), parts.size());
    std::map<PartId, std::vector<float>> vectors;
    if (space == EmbeddingSpace::z) {
        if (!fs::exists(mesh_dir / "z.json")) throw ConfigError("no z embeddings in " + mesh_dir.string());
        for (auto& e : read_vector_store(mesh_dir / "z.json", mesh_dir / "z.bin")) vectors[e.part_id] = std::move(e.values);
    } else {
        for (auto& [pid, e] : load_external_embeddings(mesh_dir / "embeddings.json", mesh_dir / "embeddings.bin")) {
            vectors[pid] = std::move(e.x);
        }
    }
    return EmbeddingIndex(mesh_dir.filename().string(), std::move(groups), std::move(vectors), space);
}

CorpusMesh corpus_mesh(const MeshArtifacts& art) {
    CorpusMesh cm;
    cm.mesh_id = art.key;
    cm.groups = art.groups;
    for (const auto& p : art.parts) cm.parts.push_back({p.part_id, p.material_id, {}});
    for (const auto& [key, e] : art.training_x) {
        auto& views = cm.parts.at(static_cast<std::size_t>(key.first)).views;
        if (static_cast<int>(views.size()) != key.second) throw FormatError("training variants are not contiguous");
        views.push_back(e.x);
    }
    return cm;
}

std::vector<CorpusMesh> load_training_corpus(const fs::path& data_dir) {
    if (!fs::is_directory(data_dir)) throw ConfigError("training data directory not found: " + data_dir.string());
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(data_dir)) {
        if (entry.is_directory() && fs::exists(entry.path() / "train.json")) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw ConfigError("no training embeddings under " + data_dir.string());
    std::vector<CorpusMesh> corpus;
    for (const auto& dir : dirs) {
        const auto parts = load_parts(dir);
        CorpusMesh cm;
        cm.mesh_id = dir.filename().string();
        cm.groups = groups_from_json(read_json(dir / "groups.json"), parts.size());
        for (const auto& p : parts) cm.parts.push_back({p.part_id, p.material_id, {}});
        for (auto& [key, e] : load_embedding_variants(dir / "train.json", dir / "train.bin")) {
            if (key.first < 0 || static_cast<std::size_t>(key.first) >= cm.parts.size()) {
                throw FormatError("training store references unknown part " + std::to_string(key.first));
            }
            auto& views = cm.parts[static_cast<std::size_t>(key.first)].views;
            if (static_cast<int>(views.size()) != key.second) throw FormatError("training variants are not contiguous");
            views.push_back(std::move(e.x));
        }
        corpus.push_back(std::move(cm));
    }
    return corpus;
}

}  // namespace mwand
