#include <benchmark/benchmark.h>

#include "mwand/dedup.hpp"
#include "mwand/encode.hpp"
#include "mwand/random.hpp"
#include "mwand/retrieve.hpp"
#include "mwand/synth.hpp"
#include "mwand/train.hpp"
#include "mwand/views.hpp"

using namespace mwand;

namespace {

struct Scene {
    Mesh mesh;
    std::vector<Part> parts;
};

const Scene& pinecone() {
    static const Scene s = [] {
        auto m = generate_archetype(Archetype::pinecone, 1, {});
        return Scene{m.mesh, m.parts};
    }();
    return s;
}

void BM_Segment(benchmark::State& state) {
    const auto& mesh = pinecone().mesh;
    for (auto _ : state) benchmark::DoNotOptimize(segment(merge_vertices(mesh)));
}
BENCHMARK(BM_Segment)->Unit(benchmark::kMillisecond);

void BM_Dedup(benchmark::State& state) {
    const auto& s = pinecone();
    for (auto _ : state) benchmark::DoNotOptimize(group_duplicates(s.parts, s.mesh));
}
BENCHMARK(BM_Dedup)->Unit(benchmark::kMillisecond);

void BM_Rasterize(benchmark::State& state) {
    const auto& s = pinecone();
    const RenderScene scene(s.mesh, s.parts);
    RenderRequest req;
    req.camera.eye = {4, 3, 2};
    req.camera.target = scene.centroid();
    req.width = req.height = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(rasterize(s.mesh, scene.face_parts(), req));
    state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}
BENCHMARK(BM_Rasterize)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_ViewSetAndEmbed(benchmark::State& state) {
    const auto& s = pinecone();
    const RenderScene scene(s.mesh, s.parts);
    ViewOptions opts;
    opts.resolution = static_cast<int>(state.range(0));
    const BuiltinBackend backend;
    for (auto _ : state) {
        const auto vs = render_view_set(scene, s.parts[5], opts);
        benchmark::DoNotOptimize(embed_part(vs, backend));
    }
}
BENCHMARK(BM_ViewSetAndEmbed)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_Select(benchmark::State& state) {
    Rng rng(1);
    const auto n = static_cast<std::size_t>(state.range(0));
    std::map<PartId, std::vector<float>> vecs;
    for (std::size_t p = 0; p < n; ++p) {
        std::vector<float> v(kEmbeddingDim);
        for (auto& x : v) x = static_cast<float>(rng.uniform());
        vecs[static_cast<PartId>(p)] = std::move(v);
    }
    const EmbeddingIndex index("bench", singleton_groups(n), vecs);
    for (auto _ : state) benchmark::DoNotOptimize(select_group(index, {{0}, 300.0}));
}
BENCHMARK(BM_Select)->Arg(100)->Arg(1000)->Unit(benchmark::kMicrosecond);

void BM_HeadStep(benchmark::State& state) {
    const auto head = ProjectionHead::initialized(kEmbeddingDim, kHiddenDim, kProjectionDim, 1);
    Rng rng(2);
    const int batch = static_cast<int>(state.range(0));
    Eigen::MatrixXd x(batch, kEmbeddingDim);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform();
    std::vector<int> labels;
    for (int i = 0; i < batch; ++i) labels.push_back(i % 8);
    for (auto _ : state) benchmark::DoNotOptimize(head_loss_and_gradients(head, x, labels, 0.07));
}
BENCHMARK(BM_HeadStep)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
