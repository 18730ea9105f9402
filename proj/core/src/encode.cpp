#include "mwand/encode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mwand/errors.hpp"
#include "mwand/io.hpp"
#include "mwand/random.hpp"

namespace mwand {

namespace {

constexpr std::string_view kHeadMagic = "MWHEAD1\n";

struct CellRange {
    int begin, end;
};

CellRange cell_range(int cell, int cells, int extent) {
    return {cell * extent / cells, (cell + 1) * extent / cells};
}

std::vector<std::string> standard_views(const ViewSelection& s) {
    std::vector<std::string> out;
    for (const auto role : s.roles()) out.emplace_back(to_string(role));
    return out;
}

}  // namespace

ViewFeature extract_view_feature(const FrameBuffer& fb, PartId part, ViewRole /*role*/) {
    ViewFeature feat(kViewFeatureDim, 0.0f);
    float dmin = std::numeric_limits<float>::infinity();
    float dmax = -std::numeric_limits<float>::infinity();
    std::size_t covered = 0;
    for (std::size_t i = 0; i < fb.pixel_count(); ++i) {
        if (fb.part_id[i] != part) continue;
        ++covered;
        dmin = std::min(dmin, fb.depth[i]);
        dmax = std::max(dmax, fb.depth[i]);
    }
    if (covered == 0) return feat;
    const double drange = static_cast<double>(dmax) - static_cast<double>(dmin);

    for (int cy = 0; cy < kOccupancyGrid; ++cy) {
        const auto yr = cell_range(cy, kOccupancyGrid, fb.height);
        for (int cx = 0; cx < kOccupancyGrid; ++cx) {
            const auto xr = cell_range(cx, kOccupancyGrid, fb.width);
            const long total = static_cast<long>(yr.end - yr.begin) * (xr.end - xr.begin);
            if (total == 0) continue;
            long hits = 0;
            for (int y = yr.begin; y < yr.end; ++y) {
                for (int x = xr.begin; x < xr.end; ++x) hits += fb.part_id[fb.index(x, y)] == part;
            }
            feat[static_cast<std::size_t>(cy * kOccupancyGrid + cx)] =
                static_cast<float>(static_cast<double>(hits) / static_cast<double>(total));
        }
    }

    constexpr int kDepthOffset = kOccupancyGrid * kOccupancyGrid;
    constexpr int kShadeOffset = kDepthOffset + kShadingGrid * kShadingGrid;
    for (int cy = 0; cy < kShadingGrid; ++cy) {
        const auto yr = cell_range(cy, kShadingGrid, fb.height);
        for (int cx = 0; cx < kShadingGrid; ++cx) {
            const auto xr = cell_range(cx, kShadingGrid, fb.width);
            double depth_sum = 0.0;
            double shade_sum = 0.0;
            long hits = 0;
            for (int y = yr.begin; y < yr.end; ++y) {
                for (int x = xr.begin; x < xr.end; ++x) {
                    const auto idx = fb.index(x, y);
                    if (fb.part_id[idx] != part) continue;
                    ++hits;
                    if (drange > 0.0) depth_sum += (static_cast<double>(fb.depth[idx]) - dmin) / drange;
                    const auto& c = fb.color[idx];
                    shade_sum += (static_cast<double>(c[0]) + c[1] + c[2]) / (3.0 * 255.0);
                }
            }
            if (hits == 0) continue;
            const auto cell = static_cast<std::size_t>(cy * kShadingGrid + cx);
            feat[kDepthOffset + cell] = static_cast<float>(depth_sum / static_cast<double>(hits));
            feat[kShadeOffset + cell] = static_cast<float>(shade_sum / static_cast<double>(hits));
        }
    }
    return feat;
}

std::vector<ViewRole> ViewSelection::roles() const {
    std::vector<ViewRole> out;
    if (isolated) out.push_back(ViewRole::isolated);
    if (context) out.push_back(ViewRole::context);
    if (full) out.push_back(ViewRole::full);
    return out;
}

PartEmbedding embed_part(const ViewSet& views, const FeatureBackend& backend, const ViewSelection& selection) {
    PartEmbedding emb;
    emb.part_id = views.part;
    emb.x.reserve(static_cast<std::size_t>(backend.dim() * selection.count()));
    for (const auto role : selection.roles()) {
        const FrameBuffer& fb = role == ViewRole::isolated ? views.isolated
                                : role == ViewRole::context ? views.context
                                                            : views.full;
        const auto f = backend.extract(fb, views.part, role);
        if (static_cast<int>(f.size()) != backend.dim()) {
            throw ConfigError("feature backend returned " + std::to_string(f.size()) + " values, declared " +
                              std::to_string(backend.dim()));
        }
        emb.x.insert(emb.x.end(), f.begin(), f.end());
    }
    return emb;
}

ProjectionHead ProjectionHead::zeros(int input, int hidden, int output) {
    ProjectionHead h;
    h.w1 = Matrix::Zero(hidden, input);
    h.b1 = Eigen::VectorXd::Zero(hidden);
    h.w2 = Matrix::Zero(output, hidden);
    h.b2 = Eigen::VectorXd::Zero(output);
    return h;
}

ProjectionHead ProjectionHead::initialized(int input, int hidden, int output, std::uint64_t seed) {
    ProjectionHead h = zeros(input, hidden, output);
    h.seed = seed;
    Rng rng(seed);
    const double a1 = 1.0 / std::sqrt(static_cast<double>(input));
    const double a2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (Eigen::Index i = 0; i < h.w1.size(); ++i) h.w1.data()[i] = rng.uniform(-a1, a1);
    for (Eigen::Index i = 0; i < h.b1.size(); ++i) h.b1[i] = rng.uniform(-a1, a1);
    for (Eigen::Index i = 0; i < h.w2.size(); ++i) h.w2.data()[i] = rng.uniform(-a2, a2);
    for (Eigen::Index i = 0; i < h.b2.size(); ++i) h.b2[i] = rng.uniform(-a2, a2);
    return h;
}

Eigen::VectorXd head_forward(const ProjectionHead& head, const Eigen::VectorXd& x) {
    if (x.size() != head.w1.cols()) {
        throw ConfigError("embedding width " + std::to_string(x.size()) + " does not match head input " +
                          std::to_string(head.w1.cols()));
    }
    const Eigen::VectorXd hidden = (head.w1 * x + head.b1).cwiseMax(0.0);
    return head.w2 * hidden + head.b2;
}

ProjectedEmbedding project(const PartEmbedding& x, const ProjectionHead& head) {
    Eigen::VectorXd xv(static_cast<Eigen::Index>(x.x.size()));
    for (std::size_t i = 0; i < x.x.size(); ++i) xv[static_cast<Eigen::Index>(i)] = x.x[i];
    const Eigen::VectorXd u = head_forward(head, xv);
    ProjectedEmbedding out;
    out.part_id = x.part_id;
    out.z.assign(static_cast<std::size_t>(u.size()), 0.0);
    const double n = u.norm();
    if (n < 1e-12) {
        if (!out.z.empty()) out.z[0] = 1.0;
        return out;
    }
    for (Eigen::Index i = 0; i < u.size(); ++i) out.z[static_cast<std::size_t>(i)] = u[i] / n;
    return out;
}

void save_head(const ProjectionHead& head, const std::filesystem::path& path, const nlohmann::json& config) {
    nlohmann::json header = {{"format", "mwand-projection-head"},
                             {"input_dim", head.input_dim()},
                             {"hidden_dim", head.hidden_dim()},
                             {"output_dim", head.output_dim()},
                             {"bias", true},
                             {"seed", head.seed},
                             {"dtype", "f32-le"},
                             {"layout", {"w1", "b1", "w2", "b2"}},
                             {"config", config}};
    const std::string hj = header.dump();
    std::string out(kHeadMagic);
    append_u32_le(out, static_cast<std::uint32_t>(hj.size()));
    out += hj;
    auto put = [&](const double* p, Eigen::Index n) {
        for (Eigen::Index i = 0; i < n; ++i) append_f32_le(out, static_cast<float>(p[i]));
    };
    put(head.w1.data(), head.w1.size());
    put(head.b1.data(), head.b1.size());
    put(head.w2.data(), head.w2.size());
    put(head.b2.data(), head.b2.size());
    write_file(path, out);
}

ProjectionHead load_head(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    if (bytes.size() < kHeadMagic.size() + 4 || bytes.compare(0, kHeadMagic.size(), kHeadMagic) != 0) {
        throw FormatError(path.string() + ": not a projection head checkpoint");
    }
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const auto hlen = load_u32_le(p + kHeadMagic.size());
    const std::size_t body = kHeadMagic.size() + 4 + hlen;
    if (bytes.size() < body) throw FormatError(path.string() + ": truncated header");
    const auto header = nlohmann::json::parse(bytes.substr(kHeadMagic.size() + 4, hlen));
    const int in = header.at("input_dim");
    const int hid = header.at("hidden_dim");
    const int outd = header.at("output_dim");
    ProjectionHead head = ProjectionHead::zeros(in, hid, outd);
    head.seed = header.value("seed", std::uint64_t{0});
    const std::size_t expected = body + 4 * head.parameter_count();
    if (bytes.size() != expected) {
        throw FormatError(path.string() + ": expected " + std::to_string(expected) + " bytes, found " +
                          std::to_string(bytes.size()));
    }
    const unsigned char* cursor = p + body;
    auto get = [&](double* dst, Eigen::Index n) {
        for (Eigen::Index i = 0; i < n; ++i, cursor += 4) {
            const float v = load_f32_le(cursor);
            if (!std::isfinite(v)) throw DataError(path.string() + ": non-finite parameter");
            dst[i] = v;
        }
    };
    get(head.w1.data(), head.w1.size());
    get(head.b1.data(), head.b1.size());
    get(head.w2.data(), head.w2.size());
    get(head.b2.data(), head.b2.size());
    return head;
}

void write_vector_store(const std::filesystem::path& index_file, const std::filesystem::path& blob_file, int dim,
                        const std::vector<StoreEntry>& entries, const nlohmann::json& extra) {
    nlohmann::json index = extra.is_object() ? extra : nlohmann::json::object();
    index["dim"] = dim;
    auto order = nlohmann::json::array();
    std::string blob;
    blob.reserve(entries.size() * static_cast<std::size_t>(dim) * 4);
    for (const auto& e : entries) {
        if (static_cast<int>(e.values.size()) != dim) {
            throw FormatError("store entry for part " + std::to_string(e.part_id) + " has " +
                              std::to_string(e.values.size()) + " values, expected " + std::to_string(dim));
        }
        nlohmann::json je = {{"part_id", e.part_id}, {"view", e.view}};
        if (e.variant != 0) je["variant"] = e.variant;
        order.push_back(std::move(je));
        for (const float v : e.values) append_f32_le(blob, v);
    }
    index["order"] = std::move(order);
    write_json(index_file, index);
    write_file(blob_file, blob);
}

std::vector<StoreEntry> read_vector_store(const std::filesystem::path& index_file,
                                          const std::filesystem::path& blob_file, int* dim_out) {
    const auto index = read_json(index_file);
    const int dim = index.at("dim").get<int>();
    if (dim < 1) throw FormatError(index_file.string() + ": dim must be positive");
    const auto& order = index.at("order");
    const std::string blob = read_file(blob_file);
    const std::size_t expected = order.size() * static_cast<std::size_t>(dim) * 4;
    if (blob.size() != expected) {
        throw FormatError(blob_file.string() + ": expected " + std::to_string(expected) + " bytes, found " +
                          std::to_string(blob.size()));
    }
    std::vector<StoreEntry> out;
    out.reserve(order.size());
    const auto* p = reinterpret_cast<const unsigned char*>(blob.data());
    for (const auto& je : order) {
        StoreEntry e;
        e.part_id = je.at("part_id").get<PartId>();
        e.view = je.at("view").get<std::string>();
        e.variant = je.value("variant", 0);
        e.values.resize(static_cast<std::size_t>(dim));
        for (auto& v : e.values) {
            v = load_f32_le(p);
            p += 4;
            if (!std::isfinite(v)) {
                throw DataError(blob_file.string() + ": non-finite value for part " + std::to_string(e.part_id));
            }
        }
        out.push_back(std::move(e));
    }
    if (dim_out) *dim_out = dim;
    return out;
}

void write_embedding_store(const std::filesystem::path& index_file, const std::filesystem::path& blob_file,
                           const std::vector<PartEmbedding>& embeddings, const ViewSelection& selection,
                           int view_dim) {
    const auto views = standard_views(selection);
    std::vector<StoreEntry> entries;
    for (const auto& emb : embeddings) {
        if (emb.x.size() != views.size() * static_cast<std::size_t>(view_dim)) {
            throw FormatError("embedding of part " + std::to_string(emb.part_id) + " has width " +
                              std::to_string(emb.x.size()));
        }
        for (std::size_t v = 0; v < views.size(); ++v) {
            const auto begin = emb.x.begin() + static_cast<std::ptrdiff_t>(v * static_cast<std::size_t>(view_dim));
            entries.push_back({emb.part_id, views[v], 0, std::vector<float>(begin, begin + view_dim)});
        }
    }
    write_vector_store(index_file, blob_file, view_dim, entries, {{"views", views}});
}

std::map<std::pair<PartId, int>, PartEmbedding> load_embedding_variants(const std::filesystem::path& index_file,
                                                                        const std::filesystem::path& blob_file) {
    int dim = 0;
    const auto entries = read_vector_store(index_file, blob_file, &dim);
    const auto index = read_json(index_file);
    const auto views = index.contains("views") ? index["views"].get<std::vector<std::string>>()
                                               : standard_views(ViewSelection{});
    for (const auto& v : views) (void)view_role_from_string(v);

    std::map<std::pair<PartId, int>, std::map<std::string, const StoreEntry*>> by_key;
    for (const auto& e : entries) {
        if (std::find(views.begin(), views.end(), e.view) == views.end()) {
            throw FormatError(index_file.string() + ": unexpected view '" + e.view + "'");
        }
        auto& slot = by_key[{e.part_id, e.variant}][e.view];
        if (slot) throw FormatError(index_file.string() + ": duplicate view '" + e.view + "' for part " + std::to_string(e.part_id));
        slot = &e;
    }
    std::map<std::pair<PartId, int>, PartEmbedding> out;
    for (const auto& [key, per_view] : by_key) {
        PartEmbedding emb;
        emb.part_id = key.first;
        emb.x.reserve(views.size() * static_cast<std::size_t>(dim));
        for (const auto& v : views) {
            const auto it = per_view.find(v);
            if (it == per_view.end()) {
                throw FormatError(index_file.string() + ": part " + std::to_string(key.first) + " is missing view '" + v + "'");
            }
            emb.x.insert(emb.x.end(), it->second->values.begin(), it->second->values.end());
        }
        out.emplace(key, std::move(emb));
    }
    return out;
}

std::map<PartId, PartEmbedding> load_external_embeddings(const std::filesystem::path& index_file,
                                                         const std::filesystem::path& blob_file) {
    std::map<PartId, PartEmbedding> out;
    for (auto& [key, emb] : load_embedding_variants(index_file, blob_file)) {
        if (key.second == 0) out.emplace(key.first, std::move(emb));
    }
    return out;
}

}  // namespace mwand
