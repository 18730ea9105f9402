#include "mwand/dedup.hpp"

#include <algorithm>
#include <cmath>

#include "mwand/errors.hpp"
#include "mwand/random.hpp"

namespace mwand {

Descriptor radial_histogram(const Part& part, const Mesh& mesh, int bins) {
    if (bins < 1) throw ConfigError("histogram needs at least one bin");
    Descriptor d;
    d.histogram.assign(static_cast<std::size_t>(bins), 0.0);
    const auto verts = part_vertex_indices(mesh, part);
    d.vertex_count = static_cast<std::uint32_t>(verts.size());
    if (verts.empty()) return d;

    Vec3 sum;
    for (const auto v : verts) sum += mesh.vertices[v];
    const Vec3 centroid = sum / static_cast<double>(verts.size());
    std::vector<double> dist;
    dist.reserve(verts.size());
    for (const auto v : verts) dist.push_back(norm(mesh.vertices[v] - centroid));
    const double extent = *std::max_element(dist.begin(), dist.end());
    d.max_radial_extent = extent;
    if (extent <= 0.0) return d;

    const double inv_n = 1.0 / static_cast<double>(verts.size());
    for (const double r : dist) {
        auto bin = static_cast<int>(std::floor(r / extent * bins));
        bin = std::clamp(bin, 0, bins - 1);
        d.histogram[static_cast<std::size_t>(bin)] += inv_n;
    }
    return d;
}

double relative_difference(double a, double b) {
    const double m = std::max(std::abs(a), std::abs(b));
    return m == 0.0 ? 0.0 : std::abs(a - b) / m;
}

bool is_duplicate(const Descriptor& a, const Descriptor& b, const DedupTolerances& tol) {
    if (a.histogram.size() != b.histogram.size()) return false;
    if (!(relative_difference(a.vertex_count, b.vertex_count) < tol.vertex_count)) return false;
    if (relative_difference(a.max_radial_extent, b.max_radial_extent) > tol.scale) return false;
    double l1 = 0.0;
    for (std::size_t i = 0; i < a.histogram.size(); ++i) l1 += std::abs(a.histogram[i] - b.histogram[i]);
    return l1 <= tol.histogram_l1;
}

DuplicateGroups group_duplicates(std::span<const Part> parts, const Mesh& mesh, const DedupTolerances& tol) {
    std::vector<const Part*> ordered;
    ordered.reserve(parts.size());
    for (const auto& p : parts) ordered.push_back(&p);
    std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->part_id < b->part_id; });

    std::vector<Descriptor> descriptors;
    descriptors.reserve(ordered.size());
    for (const auto* p : ordered) descriptors.push_back(radial_histogram(*p, mesh, tol.bins));

    DuplicateGroups out;
    PartId max_id = -1;
    for (const auto* p : ordered) max_id = std::max(max_id, p->part_id);
    out.group_of.assign(static_cast<std::size_t>(max_id + 1), 0);
    std::vector<std::size_t> exemplar_slot;  // index into `ordered` per group
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        std::size_t g = 0;
        for (; g < out.groups.size(); ++g) {
            if (is_duplicate(descriptors[exemplar_slot[g]], descriptors[i], tol)) break;
        }
        if (g == out.groups.size()) {
            out.groups.push_back({ordered[i]->part_id, {}});
            exemplar_slot.push_back(i);
        }
        out.groups[g].members.push_back(ordered[i]->part_id);
        out.group_of[static_cast<std::size_t>(ordered[i]->part_id)] = g;
    }
    return out;
}

DuplicateGroups choose_random_exemplars(DuplicateGroups groups, std::uint64_t seed) {
    Rng rng(seed);
    for (auto& g : groups.groups) g.exemplar = g.members[static_cast<std::size_t>(rng.index(g.members.size()))];
    return groups;
}

DuplicateGroups singleton_groups(std::size_t part_count) {
    DuplicateGroups out;
    out.group_of.resize(part_count);
    for (std::size_t i = 0; i < part_count; ++i) {
        const auto id = static_cast<PartId>(i);
        out.groups.push_back({id, {id}});
        out.group_of[i] = i;
    }
    return out;
}

nlohmann::json groups_to_json(const DuplicateGroups& groups) {
    auto arr = nlohmann::json::array();
    for (const auto& g : groups.groups) arr.push_back({{"exemplar", g.exemplar}, {"members", g.members}});
    return arr;
}

DuplicateGroups groups_from_json(const nlohmann::json& j, std::size_t part_count) {
    DuplicateGroups out;
    out.group_of.assign(part_count, static_cast<std::size_t>(-1));
    for (const auto& jg : j) {
        DuplicateGroup g{jg.at("exemplar").get<PartId>(), jg.at("members").get<std::vector<PartId>>()};
        if (std::find(g.members.begin(), g.members.end(), g.exemplar) == g.members.end()) {
            throw FormatError("group exemplar " + std::to_string(g.exemplar) + " not among its members");
        }
        for (const auto m : g.members) {
            if (m < 0 || static_cast<std::size_t>(m) >= part_count) {
                throw FormatError("group member " + std::to_string(m) + " out of range");
            }
            if (out.group_of[static_cast<std::size_t>(m)] != static_cast<std::size_t>(-1)) {
                throw FormatError("part " + std::to_string(m) + " appears in two groups");
            }
            out.group_of[static_cast<std::size_t>(m)] = out.groups.size();
        }
        out.groups.push_back(std::move(g));
    }
    for (std::size_t i = 0; i < part_count; ++i) {
        if (out.group_of[i] == static_cast<std::size_t>(-1)) {
            throw FormatError("part " + std::to_string(i) + " missing from groups");
        }
    }
    return out;
}

}  // namespace mwand
