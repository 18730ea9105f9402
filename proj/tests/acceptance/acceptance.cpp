// Runs the acceptance criteria and prints one PASS/FAIL line per criterion.
// Usage: acceptance [criterion numbers...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mwand/dedup.hpp"
#include "mwand/evalkit.hpp"
#include "mwand/io.hpp"
#include "mwand/pipeline.hpp"
#include "mwand/random.hpp"
#include "mwand/synth.hpp"
#include "mwand/train.hpp"
#include "oracles.hpp"

using namespace mwand;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) detail << "first failure: " << what << "; ";
        pass = pass && ok;
    }
};

using Clock = std::chrono::steady_clock;

// ---------------------------------------------------------------- 1

void gradient_check(Outcome& out) {
    Rng rng(2024);
    double worst = 0.0;
    std::size_t checked = 0;
    for (int batch = 0; batch < 5; ++batch) {
        const auto head = ProjectionHead::initialized(24, 16, 8, 100 + static_cast<std::uint64_t>(batch));
        Eigen::MatrixXd x(8, 24);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1, 1);
        std::vector<int> labels(8);
        for (auto& l : labels) l = static_cast<int>(rng.index(3));
        labels[1] = labels[0];  // at least one anchor with a positive
        const double tau = 0.07;
        const auto br = head_loss_and_gradients(head, x, labels, tau);
        const double h = 1e-5;
        auto check = [&](auto param_of, const auto& grad) {
            for (Eigen::Index k = 0; k < grad.size(); ++k) {
                ProjectionHead hp = head, hm = head;
                param_of(hp).data()[k] += h;
                param_of(hm).data()[k] -= h;
                const double fd = (head_loss_and_gradients(hp, x, labels, tau).loss -
                                   head_loss_and_gradients(hm, x, labels, tau).loss) /
                                  (2 * h);
                const double g = grad.data()[k];
                worst = std::max(worst, std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), 1e-3}));
                ++checked;
            }
        };
        check([](ProjectionHead& p) -> auto& { return p.w1; }, br.grads.w1);
        check([](ProjectionHead& p) -> auto& { return p.b1; }, br.grads.b1);
        check([](ProjectionHead& p) -> auto& { return p.w2; }, br.grads.w2);
        check([](ProjectionHead& p) -> auto& { return p.b2; }, br.grads.b2);
    }
    out.require(worst < 1e-4, "max relative error " + std::to_string(worst));
    out.detail << checked << " parameters over 5 batches, max rel err " << worst;
}

// ---------------------------------------------------------------- 2

QueryResult two_point(double pos_distance, double neg_distance) {
    QueryResult q;
    q.mesh = "hand";
    q.query = 0;
    q.positives = {1};
    q.ranking = {{1, pos_distance}, {2, neg_distance}};
    std::stable_sort(q.ranking.begin(), q.ranking.end(),
                     [](const RankedPart& a, const RankedPart& b) { return a.distance < b.distance; });
    return q;
}

void metric_oracles(Outcome& out) {
    Rng rng(7);
    std::size_t mismatches = 0;
    bool auc_in_range = true;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = 1 + rng.index(50);
        std::vector<PartId> ids(n);
        std::iota(ids.begin(), ids.end(), 0);
        rng.shuffle(std::span<PartId>(ids));
        std::vector<PartId> pos;
        for (PartId p = 0; p < static_cast<PartId>(n); ++p) {
            if (rng.uniform() < 0.3) pos.push_back(p);
        }
        if (pos.empty()) pos.push_back(static_cast<PartId>(rng.index(n)));
        const auto close = [&](double a, double b) { mismatches += !(std::abs(a - b) <= 1e-12); };
        close(average_precision(ids, pos), oracle::average_precision(ids, pos));
        close(r_precision(ids, pos), oracle::precision_at(ids, pos, pos.size()));
        for (std::size_t k : {1u, 5u, 10u, 20u, 100u}) close(recall_at_k(ids, pos, k), oracle::recall_at(ids, pos, k));

        QueryResult q;
        q.mesh = "r";
        q.query = -1;
        q.positives = pos;
        double d = 0.0;
        for (auto p : ids) {
            d += std::floor(rng.uniform(0, 3));
            q.ranking.push_back({p, d});
        }
        const double auc = pr_curve_quantile(std::vector<QueryResult>{q}, 50).auc;
        auc_in_range = auc_in_range && auc >= 0.0 && auc <= 1.0;
    }
    out.require(mismatches == 0, std::to_string(mismatches) + " metric mismatches");
    out.require(auc_in_range, "AUC outside [0, 1]");
    // Negative ahead of the positive: (0,0) to (1,0.5) gives 0.25; positive first gives 1.
    const double bad = pr_curve_quantile(std::vector<QueryResult>{two_point(2.0, 1.0)}).auc;
    const double good = pr_curve_quantile(std::vector<QueryResult>{two_point(1.0, 2.0)}).auc;
    out.require(std::abs(bad - 0.25) <= 1e-9, "two-point AUC " + std::to_string(bad));
    out.require(std::abs(good - 1.0) <= 1e-9, "two-point AUC " + std::to_string(good));
    out.detail << "1000 rankings, " << mismatches << " mismatches, two-point AUCs " << bad << " and " << good;
}

// ---------------------------------------------------------------- 3

std::set<std::set<PartId>> member_sets(const DuplicateGroups& g) {
    std::set<std::set<PartId>> out;
    for (const auto& grp : g.groups) out.insert({grp.members.begin(), grp.members.end()});
    return out;
}

void dedup_recovery(Outcome& out) {
    int exact = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed + 1000);
        std::vector<int> copies(20);
        for (auto& c : copies) c = 1 + static_cast<int>(rng.index(5));
        const auto fx = dedup_fixture(seed, copies);
        const auto parts = segment(fx.mesh);
        std::map<int, std::set<PartId>> truth;
        for (std::size_t p = 0; p < fx.base_of_part.size(); ++p) truth[fx.base_of_part[p]].insert(static_cast<PartId>(p));
        std::set<std::set<PartId>> expected;
        for (const auto& [b, s] : truth) expected.insert(s);
        const bool ok = parts.size() == fx.base_of_part.size() && member_sets(group_duplicates(parts, fx.mesh)) == expected;
        exact += ok;
        out.require(ok, "seed " + std::to_string(seed));
    }
    Rng rng(3);
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
        Shape s = uv_sphere_shape(1.0, 5 + t % 4, 6 + t % 5);
        for (auto& v : s.vertices) v = v + Vec3{rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)};
        MeshBuilder a, b;
        a.add(s.vertices, s.faces, "m");
        const auto moved = s.transformed(axis_angle({rng.normal(), rng.normal(), rng.normal()}, rng.uniform(0, 6.3),
                                                    {rng.uniform(-100, 100), rng.uniform(-100, 100), rng.uniform(-100, 100)}));
        b.add(moved.vertices, moved.faces, "m");
        const auto da = radial_histogram(segment(a.mesh())[0], a.mesh());
        const auto db = radial_histogram(segment(b.mesh())[0], b.mesh());
        for (std::size_t k = 0; k < da.histogram.size(); ++k) {
            worst = std::max(worst, std::abs(da.histogram[k] - db.histogram[k]));
        }
    }
    out.require(worst <= 1e-9, "isometry bin difference " + std::to_string(worst));
    out.detail << exact << "/50 seeds recovered exactly, max isometry bin difference " << worst;
}

// ---------------------------------------------------------------- 4

Mesh random_view_scene(Rng& rng, bool enclosed) {
    MeshBuilder b;
    const Shape target = box_shape(rng.uniform(0.1, 0.3), rng.uniform(0.1, 0.3), rng.uniform(0.1, 0.3));
    b.add(target.vertices, target.faces, "target");
    if (enclosed) {
        // An open box around the target; the opening faces a random direction.
        const Shape shell = open_box_shape(0.8, 0.8, 0.8);
        const auto xf = axis_angle({rng.normal(), rng.normal(), rng.normal()}, rng.uniform(0, 6.3));
        const auto s = shell.transformed(xf);
        b.add(s.vertices, s.faces, "shell");
    }
    const int extra = 1 + static_cast<int>(rng.index(5));
    for (int i = 0; i < extra; ++i) {
        const Shape box = box_shape(rng.uniform(0.1, 0.5), rng.uniform(0.1, 0.5), rng.uniform(0.1, 0.5));
        const Vec3 at{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        if (norm(at) < 1.2) continue;
        const auto s = box.transformed(axis_angle({rng.normal(), rng.normal(), rng.normal()}, rng.uniform(0, 6.3), at));
        b.add(s.vertices, s.faces, "clutter");
    }
    return b.take();
}

void view_oracle(Outcome& out) {
    Rng rng(11);
    ViewOptions opts;
    opts.resolution = 256;
    int zooms = 0;
    int agree = 0;
    for (int scene_i = 0; scene_i < 50; ++scene_i) {
        const Mesh mesh = random_view_scene(rng, scene_i % 2 == 1);
        const auto parts = segment(mesh);
        const RenderScene scene(mesh, parts);
        const Part& part = parts[0];
        const auto sel = select_context_view(scene, part, opts);

        // Brute force over zoom passes: argmax of raw part-pixel counts.
        Camera expected_cam;
        int expected_zoom = 0;
        double first_ratio = 0.0;
        double fraction = opts.context_fraction;
        for (int zoom = 0; zoom <= opts.max_zoom_steps; ++zoom, fraction *= 2.0) {
            const auto cams = sample_hemisphere_cameras(scene, part, 16, fraction, opts);
            std::size_t best = 0;
            int best_i = -1;
            for (int i = 0; i < 16; ++i) {
                RenderRequest req;
                req.camera = cams[static_cast<std::size_t>(i)];
                req.width = req.height = opts.resolution;
                const auto fb = rasterize(mesh, scene.face_parts(), req);
                const auto c = static_cast<std::size_t>(std::count(fb.part_id.begin(), fb.part_id.end(), part.part_id));
                if (best_i < 0 || c > best) {
                    best = c;
                    best_i = i;
                }
            }
            RenderRequest iso;
            iso.camera = cams[static_cast<std::size_t>(best_i)];
            iso.width = iso.height = opts.resolution;
            iso.only_part = part.part_id;
            const auto fb = rasterize(mesh, scene.face_parts(), iso);
            const auto alone = static_cast<std::size_t>(std::count(fb.part_id.begin(), fb.part_id.end(), part.part_id));
            const double ratio = alone == 0 ? 0.0 : static_cast<double>(best) / static_cast<double>(alone);
            if (zoom == 0) first_ratio = ratio;
            expected_cam = cams[static_cast<std::size_t>(best_i)];
            expected_zoom = zoom;
            if (ratio >= opts.occlusion_threshold) break;
        }
        const bool ok = sel.camera == expected_cam && sel.zoom_level == expected_zoom &&
                        ((sel.zoom_level > 0) == (first_ratio < opts.occlusion_threshold));
        agree += ok;
        zooms += sel.zoom_level > 0;
        out.require(ok, "scene " + std::to_string(scene_i));
    }
    out.detail << agree << "/50 scenes match the brute-force argmax, zoom fired in " << zooms;
}

// ---------------------------------------------------------------- 5

void raster_reference(Outcome& out) {
    Rng rng(5);
    std::size_t compared = 0;
    std::size_t id_mismatch = 0;
    std::size_t depth_mismatch = 0;
    double worst_rel = 0.0;
    for (int s = 0; s < 100; ++s) {
        Mesh m;
        std::vector<PartId> fp;
        const int tris = 1 + static_cast<int>(rng.index(50));
        for (int t = 0; t < tris; ++t) {
            const Vec3 c{rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(-2, 2)};
            const auto base = static_cast<std::uint32_t>(m.vertices.size());
            for (int k = 0; k < 3; ++k) {
                m.vertices.push_back(c + Vec3{rng.uniform(-0.7, 0.7), rng.uniform(-0.7, 0.7), rng.uniform(-0.7, 0.7)});
            }
            m.faces.push_back({base, base + 1, base + 2});
            m.face_material.push_back(0);
            fp.push_back(static_cast<PartId>(rng.index(6)));
        }
        Camera cam;
        const Vec3 dir = normalized(Vec3{rng.normal(), rng.normal(), rng.normal()});
        cam.eye = dir * rng.uniform(5.5, 8.0);
        cam.target = {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)};
        cam.up = std::abs(dir.z) > 0.9 ? Vec3{0, 1, 0} : Vec3{0, 0, 1};
        cam.vertical_fov = rng.uniform(0.5, 1.0);
        RenderRequest req;
        req.camera = cam;
        req.width = req.height = 128;
        req.shade = false;
        const auto fb = rasterize(m, fp, req);
        const auto rc = oracle::ray_cast(m, fp, cam, 128, 128);
        for (std::size_t i = 0; i < fb.pixel_count(); ++i) {
            if (!rc.interior[i]) continue;
            ++compared;
            if (fb.part_id[i] != rc.part_id[i]) {
                ++id_mismatch;
                continue;
            }
            if (rc.part_id[i] < 0) continue;
            const double rel = std::abs(double(fb.depth[i]) - rc.depth[i]) / rc.depth[i];
            worst_rel = std::max(worst_rel, rel);
            depth_mismatch += rel > 1e-5;
        }
    }
    out.require(id_mismatch == 0, std::to_string(id_mismatch) + " part-id mismatches");
    out.require(depth_mismatch == 0, std::to_string(depth_mismatch) + " depth mismatches");
    out.require(compared > 100u * 128u * 128u / 2, "too few interior pixels");
    out.detail << compared << " interior pixels, " << id_mismatch << " id mismatches, max rel depth err " << worst_rel;
}

// ---------------------------------------------------------------- 6

std::set<PartId> ids_of(const std::vector<RankedPart>& sel) {
    std::set<PartId> s;
    for (const auto& r : sel) s.insert(r.part_id);
    return s;
}

void selection_semantics(Outcome& out) {
    SyntheticSpec spec;
    const auto bench = generate_synthetic_benchmark(1, spec);
    PipelineConfig cfg;
    cfg.views.resolution = 64;
    std::size_t violations = 0;
    std::size_t checks = 0;
    for (const auto& sm : bench.meshes) {
        const auto art = process_mesh(sm.mesh, sm.mesh.name, cfg, nullptr, false);
        const auto index = art.index(EmbeddingSpace::x);
        const auto n = static_cast<PartId>(index.part_count());
        double max_d = 0.0;
        for (PartId q = 0; q < n; ++q) {
            const auto r = rank_parts(index, q);
            if (!r.empty()) max_d = std::max(max_d, r.back().distance);
        }
        std::vector<double> grid;
        for (int k = 0; k < 50; ++k) grid.push_back(max_d * k / 49.0);
        std::vector<std::vector<std::set<PartId>>> sel(static_cast<std::size_t>(n));
        for (PartId q = 0; q < n; ++q) {
            for (double lam : grid) sel[static_cast<std::size_t>(q)].push_back(ids_of(select_group(index, {{q}, lam})));
        }
        for (PartId q = 0; q < n; ++q) {
            const auto& sq = sel[static_cast<std::size_t>(q)];
            for (std::size_t k = 0; k < grid.size(); ++k) {
                if (k > 0) {
                    ++checks;
                    violations += !std::includes(sq[k].begin(), sq[k].end(), sq[k - 1].begin(), sq[k - 1].end());
                }
                const PartId other = (q * 7 + 3) % n;
                const auto both = ids_of(select_group(index, {{q, other}, grid[k]}));
                ++checks;
                violations += !std::includes(both.begin(), both.end(), sq[k].begin(), sq[k].end());
                for (PartId p = 0; p < n; ++p) {
                    ++checks;
                    violations += sq[k].count(p) != sel[static_cast<std::size_t>(p)][k].count(q);
                }
            }
        }
    }
    out.require(violations == 0, std::to_string(violations) + " violations");
    out.detail << checks << " checks on " << bench.meshes.size() << " meshes, " << violations << " violations";
}

// ---------------------------------------------------------------- 7

void end_to_end_quality(Outcome& out) {
    const auto t0 = Clock::now();
    PipelineConfig train_cfg;
    train_cfg.views.resolution = 128;
    train_cfg.training_data = true;
    train_cfg.extra_views = 4;
    SyntheticSpec train_spec;
    train_spec.mesh_count = 60;
    const auto train_bench = generate_synthetic_benchmark(101, train_spec);
    std::vector<CorpusMesh> corpus;
    for (const auto& sm : train_bench.meshes) {
        corpus.push_back(corpus_mesh(process_mesh(sm.mesh, sm.mesh.name, train_cfg, nullptr, false)));
    }
    const auto samples = balance_dataset(corpus);
    TrainConfig tc;
    tc.temperature = 0.07;
    tc.learning_rate = 1e-3;
    tc.batch_size = 128;
    tc.steps = 1000;
    const auto trained = train_projection_head(samples, tc);
    const auto t1 = Clock::now();

    PipelineConfig eval_cfg;
    eval_cfg.views.resolution = 128;
    eval_cfg.space = EmbeddingSpace::z;
    const auto bench = generate_synthetic_benchmark(1);
    std::vector<QueryResult> val, test;
    for (std::size_t i = 0; i < bench.meshes.size(); ++i) {
        const auto& sm = bench.meshes[i];
        const auto art = process_mesh(sm.mesh, sm.mesh.name, eval_cfg, &trained.head, false);
        auto results = run_queries(art.index(EmbeddingSpace::z), {sm.mesh.name, sm.queries});
        auto& dst = i < 5 ? val : test;
        dst.insert(dst.end(), results.begin(), results.end());
    }
    const auto rep = evaluate(val, test);
    out.require(rep.auc_pr >= 0.90, "AUC-PR " + std::to_string(rep.auc_pr));
    out.require(rep.f1 >= 0.80, "F1 " + std::to_string(rep.f1));
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "AUC-PR %.4f, F1 %.4f, mAP %.4f, R-Prec %.4f, lambda %.3f, %zu train samples, %zu test queries, "
                  "train %.0f s",
                  rep.auc_pr, rep.f1, rep.map, rep.r_prec, rep.lambda, samples.size(), test.size(),
                  std::chrono::duration<double>(t1 - t0).count());
    out.detail << buf;
}

// ---------------------------------------------------------------- 8

void determinism(Outcome& out) {
    oracle::TempDir dir("mwand-accept");
    SyntheticSpec spec;
    spec.mesh_count = 3;
    write_synthetic_benchmark(generate_synthetic_benchmark(9, spec), dir.path());
    save_head(ProjectionHead::initialized(kEmbeddingDim, 64, 16, 4), dir / "head.ckpt");
    std::vector<std::string> runs;
    for (int run = 0; run < 2; ++run) {
        PipelineConfig cfg;
        for (const auto& name : {"pinecone_0.obj", "fence_1.obj", "plant_2.obj"}) cfg.inputs.push_back(dir / name);
        cfg.out_dir = dir / ("run" + std::to_string(run));
        cfg.views.resolution = 64;
        cfg.head_checkpoint = dir / "head.ckpt";
        cfg.space = EmbeddingSpace::z;
        cfg.jobs = run + 1;
        std::string all;
        for (const auto& m : run_pipeline(cfg)) all += m.dump() + "\n";
        runs.push_back(all);
    }
    out.require(runs[0] == runs[1], "manifests differ");
    out.detail << "2 runs x 3 meshes, manifest sha256 " << sha256_hex(runs[0]).substr(0, 16)
               << (runs[0] == runs[1] ? " identical" : " differs");
}

// ---------------------------------------------------------------- 9

/// Expected per-key sample counts and tag mix, derived from the rules alone.
struct KeyExpectation {
    std::size_t total = 0;
    std::size_t base = 0;
    std::size_t instances = 0;
    std::size_t views = 0;
    bool capped = false;
};

std::map<std::pair<std::string, MaterialId>, KeyExpectation> balance_oracle(const std::vector<CorpusMesh>& corpus,
                                                                            const BalanceConfig& cfg) {
    std::map<std::pair<std::string, MaterialId>, KeyExpectation> out;
    for (const auto& mesh : corpus) {
        std::map<MaterialId, std::size_t> units, members;
        std::map<MaterialId, std::size_t> views_per_part;
        for (const auto& g : mesh.groups.groups) {
            std::set<MaterialId> seen;
            for (auto p : g.members) {
                const auto& part = mesh.parts[static_cast<std::size_t>(p)];
                ++members[part.material_id];
                if (seen.insert(part.material_id).second) ++units[part.material_id];
                views_per_part[part.material_id] = part.views.size();
            }
        }
        std::map<MaterialId, KeyExpectation> keys;
        const auto floor_n = static_cast<std::size_t>(cfg.min_samples);
        for (const auto& [mat, u] : units) {
            KeyExpectation e;
            e.base = u;
            e.instances = u >= floor_n ? 0 : std::min(floor_n, members[mat]) - u;
            const std::size_t have = u + e.instances;
            e.views = have >= floor_n ? 0 : std::min(floor_n, have * views_per_part[mat]) - have;
            e.total = have + e.views;
            if (e.total < 2) continue;
            if (e.total > static_cast<std::size_t>(cfg.max_samples)) {
                e.total = static_cast<std::size_t>(cfg.max_samples);
                e.capped = true;
            }
            keys[mat] = e;
        }
        for (bool changed = true; changed && !keys.empty();) {
            changed = false;
            std::size_t least = SIZE_MAX;
            for (const auto& [mat, e] : keys) least = std::min(least, e.total);
            const auto limit = static_cast<std::size_t>(cfg.max_ratio * static_cast<double>(least));
            for (auto& [mat, e] : keys) {
                if (e.total > limit) {
                    e.total = limit;
                    e.capped = true;
                    changed = true;
                }
            }
        }
        for (const auto& [mat, e] : keys) out[{mesh.mesh_id, mat}] = e;
    }
    return out;
}

void balancing_rules(Outcome& out) {
    Rng rng(31);
    std::size_t keys_checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<CorpusMesh> corpus;
        for (int mi = 0, nm = 1 + static_cast<int>(rng.index(3)); mi < nm; ++mi) {
            CorpusMesh mesh;
            mesh.mesh_id = "mesh" + std::to_string(mi);
            const int n_parts = 1 + static_cast<int>(rng.index(trial % 4 == 0 ? 400 : 40));
            const int n_mats = 1 + static_cast<int>(rng.index(5));
            const std::size_t n_views = 1 + rng.index(4);
            for (PartId p = 0; p < n_parts; ++p) {
                CorpusPart cp;
                cp.part_id = p;
                cp.material_id = static_cast<MaterialId>(rng.index(static_cast<std::uint64_t>(n_mats)));
                for (std::size_t v = 0; v < n_views; ++v) cp.views.push_back({float(p), float(v)});
                mesh.parts.push_back(cp);
            }
            // Random dedup groups: consecutive runs of 1..4 parts.
            mesh.groups.group_of.resize(static_cast<std::size_t>(n_parts));
            for (PartId p = 0; p < n_parts;) {
                const auto len = std::min<PartId>(n_parts - p, 1 + static_cast<PartId>(rng.index(4)));
                DuplicateGroup g;
                g.exemplar = p;
                for (PartId k = 0; k < len; ++k) {
                    g.members.push_back(p + k);
                    mesh.groups.group_of[static_cast<std::size_t>(p + k)] = mesh.groups.groups.size();
                }
                mesh.groups.groups.push_back(g);
                p += len;
            }
            corpus.push_back(std::move(mesh));
        }
        BalanceConfig cfg;
        cfg.seed = static_cast<std::uint64_t>(trial);
        const auto samples = balance_dataset(corpus, cfg);
        const auto expected = balance_oracle(corpus, cfg);

        std::map<std::pair<std::string, MaterialId>, KeyExpectation> got;
        std::set<std::tuple<std::string, PartId, int>> unique;
        for (const auto& s : samples) {
            auto& e = got[s.material_key()];
            ++e.total;
            e.base += s.tag == SampleTag::base;
            e.instances += s.tag == SampleTag::extra_instance;
            e.views += s.tag == SampleTag::extra_view;
            out.require(unique.insert({s.mesh_id, s.part_id, s.view_variant}).second, "duplicate sample");
            out.require(s.x == std::vector<float>{float(s.part_id), float(s.view_variant)}, "sample vector");
        }
        out.require(got.size() == expected.size(), "key set size in trial " + std::to_string(trial));
        for (const auto& [key, e] : expected) {
            const auto it = got.find(key);
            if (it == got.end()) {
                out.require(false, "missing key in trial " + std::to_string(trial));
                continue;
            }
            ++keys_checked;
            out.require(it->second.total == e.total, "count in trial " + std::to_string(trial));
            if (!e.capped) {
                out.require(it->second.base == e.base && it->second.instances == e.instances && it->second.views == e.views,
                            "tag mix in trial " + std::to_string(trial));
            }
            out.require(it->second.total <= static_cast<std::size_t>(cfg.max_samples), "cap");
        }
        // Per-mesh ratio bound.
        std::map<std::string, std::pair<std::size_t, std::size_t>> range;
        for (const auto& [key, e] : got) {
            auto& r = range.try_emplace(key.first, SIZE_MAX, 0).first->second;
            r.first = std::min(r.first, e.total);
            r.second = std::max(r.second, e.total);
        }
        for (const auto& [mesh, r] : range) out.require(r.second <= 5 * r.first, "ratio in " + mesh);
    }
    out.detail << "200 random corpora, " << keys_checked << " material keys match the rule oracle";
}

struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<void(Outcome&)> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all{
        {1, "gradient correctness", 60, gradient_check},
        {2, "metric oracles", 60, metric_oracles},
        {3, "dedup recovery", 60, dedup_recovery},
        {4, "view-selection oracle", 120, view_oracle},
        {5, "rasterizer reference", 120, raster_reference},
        {6, "selection semantics", 60, selection_semantics},
        {7, "synthetic end-to-end quality", 900, end_to_end_quality},
        {8, "determinism", 600, determinism},
        {9, "balancing rules", 600, balancing_rules},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));
    int failed = 0;
    for (const auto& c : all) {
        if (!only.empty() && !only.count(c.id)) continue;
        Outcome out;
        const auto t0 = Clock::now();
        try {
            c.run(out);
        } catch (const std::exception& e) {
            out.require(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        out.require(secs <= c.budget_s, "time budget exceeded");
        failed += !out.pass;
        std::printf("criterion %d %s: %s (%s; %.1f s)\n", c.id, c.name, out.pass ? "PASS" : "FAIL", out.detail.str().c_str(),
                    secs);
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
