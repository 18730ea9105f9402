#include <cstdio>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mwand/dedup.hpp"
#include "mwand/encode.hpp"
#include "mwand/errors.hpp"
#include "mwand/evalkit.hpp"
#include "mwand/io.hpp"
#include "mwand/mesh.hpp"
#include "mwand/pipeline.hpp"
#include "mwand/retrieve.hpp"
#include "mwand/service.hpp"
#include "mwand/synth.hpp"
#include "mwand/train.hpp"
#include "mwand/views.hpp"

namespace fs = std::filesystem;
using namespace mwand;

namespace {

void add_dedup_flags(CLI::App* app, DedupTolerances& tol) {
    app->add_option("--dedup-bins", tol.bins, "Radial histogram bins")->capture_default_str();
    app->add_option("--dedup-l1", tol.histogram_l1, "Histogram L1 tolerance")->capture_default_str();
    app->add_option("--dedup-scale-tol", tol.scale, "Relative max-extent tolerance")->capture_default_str();
    app->add_option("--dedup-count-tol", tol.vertex_count, "Relative vertex-count tolerance")->capture_default_str();
}

void add_view_flags(CLI::App* app, ViewOptions& v) {
    app->add_option("--views-res", v.resolution, "Render resolution in pixels")->capture_default_str();
    app->add_option("--views-candidates", v.candidates, "Hemisphere camera candidates")->capture_default_str();
    app->add_option("--views-fov-deg", v.fov_deg, "Vertical field of view in degrees")->capture_default_str();
    app->add_option("--views-occlusion-thresh", v.occlusion_threshold, "Visibility ratio that triggers zooming")
        ->capture_default_str();
}

std::vector<PartId> parse_parts(const std::string& csv) {
    std::vector<PartId> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        const auto v = std::stol(item, &used);
        if (used != item.size()) throw RequestError("invalid part id '" + item + "'");
        out.push_back(static_cast<PartId>(v));
    }
    if (out.empty()) throw RequestError("no part ids given");
    return out;
}

void emit(const std::string& text, const std::string& out) {
    if (out.empty() || out == "-") {
        std::cout << text;
    } else {
        write_file(out, text);
    }
}

std::vector<Part> segmented(const std::string& path, Mesh& mesh) {
    mesh = merge_vertices(load_obj_file(path));
    return assign_part_materials(mesh, connected_components(mesh));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Material-aware part grouping for segmented triangle meshes"};
    app.require_subcommand(1);

    // segment
    std::string seg_mesh, seg_out;
    auto* seg = app.add_subcommand("segment", "Split a mesh into connected parts");
    seg->add_option("mesh", seg_mesh, "Wavefront mesh")->required()->check(CLI::ExistingFile);
    seg->add_option("--out", seg_out, "Output JSON (stdout when omitted)");

    // dedup
    std::string dd_mesh, dd_out;
    DedupTolerances dd_tol;
    std::optional<std::uint64_t> dd_random;
    auto* dd = app.add_subcommand("dedup", "Group rigid near-duplicate parts");
    dd->add_option("mesh", dd_mesh, "Wavefront mesh")->required()->check(CLI::ExistingFile);
    add_dedup_flags(dd, dd_tol);
    dd->add_option("--random-exemplar-seed", dd_random, "Pick exemplars at random with this seed");
    dd->add_option("--out", dd_out, "Output JSON (stdout when omitted)");

    // views
    std::string vw_mesh, vw_out = "out", vw_parts;
    ViewOptions vw_opts;
    auto* vw = app.add_subcommand("views", "Render isolated, context and full views of parts");
    vw->add_option("mesh", vw_mesh, "Wavefront mesh")->required()->check(CLI::ExistingFile);
    vw->add_option("--part", vw_parts, "Comma-separated part ids (all parts when omitted)");
    vw->add_option("--out", vw_out, "Output root; images go to <out>/views/<mesh>/<part>/")->capture_default_str();
    add_view_flags(vw, vw_opts);

    // embed (full pipeline)
    PipelineConfig pc;
    std::string pc_space = "x";
    std::string pc_head;
    std::optional<std::uint64_t> pc_random;
    bool pc_no_dedup = false;
    auto* em = app.add_subcommand("embed", "Run segmentation, dedup, views and embedding; write artifacts");
    em->add_option("meshes", pc.inputs, "Wavefront meshes")->required()->check(CLI::ExistingFile);
    em->add_option("--out", pc.out_dir, "Artifact directory")->capture_default_str();
    add_dedup_flags(em, pc.dedup);
    em->add_flag("--no-dedup", pc_no_dedup, "Embed every part");
    em->add_option("--random-exemplar-seed", pc_random, "Pick exemplars at random with this seed");
    add_view_flags(em, pc.views);
    em->add_option("--backend", pc.backend, "builtin or external:<dir>")->capture_default_str();
    em->add_option("--head", pc_head, "Projection head checkpoint");
    em->add_option("--space", pc_space, "Retrieval space: x or z")->capture_default_str();
    em->add_flag("--dump-views", pc.dump_views, "Write view PNGs");
    em->add_flag("--training-data", pc.training_data, "Also embed every part with extra viewpoints for training");
    em->add_option("--extra-views", pc.extra_views, "Extra viewpoints per part for training")->capture_default_str();
    em->add_option("--seed", pc.seed, "Seed")->capture_default_str();
    em->add_option("--jobs", pc.jobs, "Worker threads")->capture_default_str();

    // train
    std::string tr_data, tr_out = "head.ckpt", tr_loss;
    TrainConfig tr_cfg;
    BalanceConfig tr_bal;
    auto* tr = app.add_subcommand("train", "Train the projection head with a supervised contrastive loss");
    tr->add_option("--data", tr_data, "Directory of embed --training-data outputs")->required();
    tr->add_option("--steps", tr_cfg.steps, "Optimizer steps")->capture_default_str();
    tr->add_option("--batch", tr_cfg.batch_size, "Batch size")->capture_default_str();
    tr->add_option("--lr", tr_cfg.learning_rate, "Adam learning rate")->capture_default_str();
    tr->add_option("--tau", tr_cfg.temperature, "Temperature")->capture_default_str();
    tr->add_option("--seed", tr_cfg.seed, "Seed")->capture_default_str();
    tr->add_option("--samples-per-key", tr_cfg.samples_per_key, "Samples drawn per material per batch")
        ->capture_default_str();
    tr->add_option("--out", tr_out, "Checkpoint path")->capture_default_str();
    tr->add_option("--loss-csv", tr_loss, "Loss curve CSV (default: <out>.loss.csv)");

    // query / rank
    std::string q_index = "out", q_mesh, q_parts, q_space = "x";
    double q_lambda = 0.0;
    auto* qu = app.add_subcommand("query", "Select parts within lambda of the query parts");
    qu->add_option("--index-dir", q_index, "Artifact directory")->capture_default_str();
    qu->add_option("--mesh", q_mesh, "Mesh id (artifact subdirectory)")->required();
    qu->add_option("--part", q_parts, "Query part ids, comma separated")->required();
    qu->add_option("--lambda", q_lambda, "Distance threshold")->required();
    qu->add_option("--space", q_space, "x or z")->capture_default_str();

    std::string r_index = "out", r_mesh, r_space = "x";
    PartId r_part = 0;
    auto* rk = app.add_subcommand("rank", "Rank every part by distance to one query part");
    rk->add_option("--index-dir", r_index, "Artifact directory")->capture_default_str();
    rk->add_option("--mesh", r_mesh, "Mesh id (artifact subdirectory)")->required();
    rk->add_option("--part", r_part, "Query part id")->required();
    rk->add_option("--space", r_space, "x or z")->capture_default_str();

    // eval
    std::string ev_bench, ev_index = "out", ev_out, ev_space = "x";
    int ev_val = 5, ev_thresholds = 200;
    bool ev_micro = false;
    auto* ev = app.add_subcommand("eval", "Evaluate retrieval and grouping on a benchmark");
    ev->add_option("--benchmark", ev_bench, "Benchmark JSON")->required()->check(CLI::ExistingFile);
    ev->add_option("--index-dir", ev_index, "Artifact directory")->capture_default_str();
    ev->add_option("--val-meshes", ev_val, "Leading meshes used to select lambda")->capture_default_str();
    ev->add_option("--thresholds", ev_thresholds, "Quantile thresholds")->capture_default_str();
    ev->add_flag("--micro", ev_micro, "Pool decisions across queries for the PR curve");
    ev->add_option("--space", ev_space, "x or z")->capture_default_str();
    ev->add_option("--out", ev_out, "Report JSON (stdout when omitted)");

    // genbench
    std::uint64_t gb_seed = 0;
    std::string gb_out = "bench", gb_arch = "pinecone,fence,plant";
    SyntheticSpec gb_spec;
    auto* gb = app.add_subcommand("genbench", "Generate a synthetic benchmark");
    gb->add_option("--seed", gb_seed, "Seed")->capture_default_str();
    gb->add_option("--out", gb_out, "Output directory")->capture_default_str();
    gb->add_option("--meshes", gb_spec.mesh_count, "Mesh count")->capture_default_str();
    gb->add_option("--archetypes", gb_arch, "Comma-separated archetypes")->capture_default_str();
    gb->add_option("--pinecone-scales", gb_spec.pinecone_scales, "Scales per pinecone")->capture_default_str();
    gb->add_option("--fence-slats", gb_spec.fence_slats, "Slats per fence")->capture_default_str();
    gb->add_option("--fence-rails", gb_spec.fence_rails, "Rails per fence")->capture_default_str();
    gb->add_option("--plant-stems", gb_spec.plant_stems, "Stems per plant")->capture_default_str();
    gb->add_option("--leaves-per-stem", gb_spec.leaves_per_stem, "Leaves per stem")->capture_default_str();
    gb->add_option("--jitter-scale", gb_spec.jitter.scale, "Per-axis scale jitter")->capture_default_str();
    gb->add_option("--jitter-rotation", gb_spec.jitter.rotation_deg, "Rotation jitter in degrees")
        ->capture_default_str();
    gb->add_option("--jitter-noise", gb_spec.jitter.vertex_noise, "Vertex noise relative to part size")
        ->capture_default_str();

    // serve
    std::string sv_host = "127.0.0.1", sv_data = "mwand-data", sv_head, sv_space = "x";
    int sv_port = 8080;
    PipelineConfig sv_pc;
    auto* sv = app.add_subcommand("serve", "Serve the HTTP API");
    sv->add_option("--host", sv_host, "Bind address")->envname("MWAND_HOST")->capture_default_str();
    sv->add_option("--port", sv_port, "Port")->envname("MWAND_PORT")->capture_default_str();
    sv->add_option("--data-dir", sv_data, "Session storage")->envname("MWAND_DATA_DIR")->capture_default_str();
    sv->add_option("--views-res", sv_pc.views.resolution, "Render resolution")
        ->envname("MWAND_VIEWS_RES")
        ->capture_default_str();
    sv->add_option("--backend", sv_pc.backend, "builtin or external:<dir>")
        ->envname("MWAND_BACKEND")
        ->capture_default_str();
    sv->add_option("--head", sv_head, "Projection head checkpoint")->envname("MWAND_HEAD");
    sv->add_option("--space", sv_space, "x or z")->envname("MWAND_SPACE")->capture_default_str();
    sv->add_option("--jobs", sv_pc.jobs, "Worker threads per ingest")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*seg) {
            Mesh mesh;
            const auto parts = segmented(seg_mesh, mesh);
            auto arr = nlohmann::json::array();
            for (const auto& p : parts) arr.push_back(part_to_json(p));
            emit(arr.dump(2) + "\n", seg_out);
        } else if (*dd) {
            Mesh mesh;
            const auto parts = segmented(dd_mesh, mesh);
            auto groups = group_duplicates(parts, mesh, dd_tol);
            if (dd_random) groups = choose_random_exemplars(std::move(groups), *dd_random);
            emit(groups_to_json(groups).dump(2) + "\n", dd_out);
        } else if (*vw) {
            Mesh mesh;
            const auto parts = segmented(vw_mesh, mesh);
            const RenderScene scene(mesh, parts);
            std::vector<PartId> ids;
            if (vw_parts.empty()) {
                for (const auto& p : parts) ids.push_back(p.part_id);
            } else {
                ids = parse_parts(vw_parts);
            }
            for (const auto pid : ids) {
                const auto vs = render_view_set(scene, scene.part(pid), vw_opts);
                const auto dir = fs::path(vw_out) / "views" / mesh_key(vw_mesh) / std::to_string(pid);
                write_png(vs.isolated, dir / "isolated.png");
                write_png(vs.context, dir / "context.png");
                write_png(vs.full, dir / "full.png");
            }
        } else if (*em) {
            pc.space = embedding_space_from_string(pc_space);
            if (!pc_head.empty()) pc.head_checkpoint = pc_head;
            pc.dedup_enabled = !pc_no_dedup;
            pc.random_exemplar_seed = pc_random;
            const auto manifests = run_pipeline(pc);
            for (const auto& m : manifests) {
                std::cout << m["mesh"].get<std::string>() << ": " << m["parts"] << " parts, " << m["exemplars"]
                          << " exemplars\n";
            }
        } else if (*tr) {
            tr_cfg.validate();
            tr_bal.seed = tr_cfg.seed;
            const auto corpus = load_training_corpus(tr_data);
            const auto samples = balance_dataset(corpus, tr_bal);
            if (samples.empty()) throw ConfigError("no material has two or more training samples");
            const auto result = train_projection_head(samples, tr_cfg);
            save_head(result.head, tr_out,
                      {{"tau", tr_cfg.temperature},
                       {"lr", tr_cfg.learning_rate},
                       {"steps", tr_cfg.steps},
                       {"batch", tr_cfg.batch_size},
                       {"seed", tr_cfg.seed},
                       {"samples", samples.size()}});
            write_file(tr_loss.empty() ? tr_out + ".loss.csv" : tr_loss, loss_curve_csv(result.loss_curve));
            if (!result.loss_curve.empty()) {
                std::cout << "final loss " << result.loss_curve.back() << " over " << samples.size() << " samples\n";
            }
        } else if (*qu) {
            const auto index = load_index(fs::path(q_index) / q_mesh, embedding_space_from_string(q_space));
            const auto selected = select_group(index, {parse_parts(q_parts), q_lambda});
            std::cout << selection_to_json(selected, q_lambda).dump() << "\n";
        } else if (*rk) {
            const auto index = load_index(fs::path(r_index) / r_mesh, embedding_space_from_string(r_space));
            std::cout << ranking_csv(rank_parts(index, r_part));
        } else if (*ev) {
            const auto bench = benchmark_from_json(read_json(ev_bench));
            if (ev_val < 1 || static_cast<std::size_t>(ev_val) >= bench.size()) {
                throw ConfigError("--val-meshes must leave at least one test mesh");
            }
            const auto space = embedding_space_from_string(ev_space);
            std::vector<QueryResult> val, test;
            for (std::size_t i = 0; i < bench.size(); ++i) {
                const auto index = load_index(fs::path(ev_index) / mesh_key(bench[i].mesh), space);
                auto results = run_queries(index, bench[i]);
                auto& dst = i < static_cast<std::size_t>(ev_val) ? val : test;
                dst.insert(dst.end(), results.begin(), results.end());
            }
            const auto report =
                evaluate(val, test, ev_thresholds, ev_micro ? PrAveraging::micro : PrAveraging::macro);
            emit(report_to_json(report).dump(2) + "\n", ev_out);
        } else if (*gb) {
            gb_spec.archetypes.clear();
            std::stringstream ss(gb_arch);
            std::string item;
            while (std::getline(ss, item, ',')) gb_spec.archetypes.push_back(archetype_from_string(item));
            const auto bench = generate_synthetic_benchmark(gb_seed, gb_spec);
            write_synthetic_benchmark(bench, gb_out);
            std::size_t queries = 0;
            for (const auto& m : bench.meshes) queries += m.queries.size();
            std::cout << bench.meshes.size() << " meshes, " << queries << " queries\n";
        } else if (*sv) {
            ServiceOptions opts;
            opts.data_dir = sv_data;
            opts.pipeline = sv_pc;
            opts.pipeline.space = embedding_space_from_string(sv_space);
            if (!sv_head.empty()) opts.pipeline.head_checkpoint = sv_head;
            MaterialService service(opts);
            HttpServer server(service);
            std::cout << "listening on " << sv_host << ":" << sv_port << std::endl;
            server.listen(sv_host, sv_port);
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
