#include "mwand/retrieve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mwand/errors.hpp"

namespace mwand {

std::string_view to_string(EmbeddingSpace space) { return space == EmbeddingSpace::x ? "x" : "z"; }

EmbeddingSpace embedding_space_from_string(std::string_view s) {
    if (s == "x") return EmbeddingSpace::x;
    if (s == "z") return EmbeddingSpace::z;
    throw ConfigError("unknown embedding space '" + std::string(s) + "' (expected x or z)");
}

double l1_distance(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        throw ConfigError("embedding widths differ: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sum += std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
    }
    return sum;
}

double similarity(std::span<const float> a, std::span<const float> b) { return -l1_distance(a, b); }

EmbeddingIndex::EmbeddingIndex(std::string mesh_id, DuplicateGroups groups,
                               std::map<PartId, std::vector<float>> exemplar_vectors, EmbeddingSpace space)
    : mesh_id_(std::move(mesh_id)), groups_(std::move(groups)), space_(space) {
    group_vectors_.reserve(groups_.groups.size());
    for (const auto& g : groups_.groups) {
        auto it = exemplar_vectors.find(g.exemplar);
        if (it == exemplar_vectors.end()) {
            throw NotFoundError("no embedding for exemplar part " + std::to_string(g.exemplar));
        }
        if (group_vectors_.empty()) dim_ = it->second.size();
        if (it->second.size() != dim_) throw ConfigError("exemplar embeddings have mixed widths");
        group_vectors_.push_back(std::move(it->second));
    }
}

std::span<const float> EmbeddingIndex::vector_of(PartId part) const {
    if (!contains(part)) throw NotFoundError("unknown part " + std::to_string(part) + " in mesh " + mesh_id_);
    return group_vectors_[groups_.group_index(part)];
}

std::vector<double> EmbeddingIndex::distances_from(PartId part) const {
    const auto q = vector_of(part);
    std::vector<double> per_group(group_vectors_.size());
    for (std::size_t g = 0; g < group_vectors_.size(); ++g) per_group[g] = l1_distance(q, group_vectors_[g]);
    std::vector<double> out(part_count());
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = per_group[groups_.group_of[p]];
    return out;
}

std::vector<RankedPart> rank_parts(const EmbeddingIndex& index, PartId query) {
    const auto dist = index.distances_from(query);
    std::vector<RankedPart> out;
    out.reserve(dist.size());
    for (std::size_t p = 0; p < dist.size(); ++p) {
        if (static_cast<PartId>(p) != query) out.push_back({static_cast<PartId>(p), dist[p]});
    }
    std::stable_sort(out.begin(), out.end(), [](const RankedPart& a, const RankedPart& b) { return a.distance < b.distance; });
    return out;
}

std::vector<RankedPart> select_group(const EmbeddingIndex& index, const SelectionRequest& req) {
    if (req.query_part_ids.empty()) throw RequestError("selection needs at least one query part");
    if (!(req.lambda >= 0.0)) throw RequestError("lambda must be a non-negative number");
    std::vector<double> best(index.part_count(), std::numeric_limits<double>::infinity());
    for (const auto q : req.query_part_ids) {
        const auto dist = index.distances_from(q);
        for (std::size_t p = 0; p < best.size(); ++p) best[p] = std::min(best[p], dist[p]);
    }
    for (const auto q : req.query_part_ids) best[static_cast<std::size_t>(q)] = 0.0;
    std::vector<RankedPart> out;
    for (std::size_t p = 0; p < best.size(); ++p) {
        if (best[p] <= req.lambda) out.push_back({static_cast<PartId>(p), best[p]});
    }
    std::stable_sort(out.begin(), out.end(), [](const RankedPart& a, const RankedPart& b) { return a.distance < b.distance; });
    return out;
}

nlohmann::json selection_to_json(std::span<const RankedPart> selected, double lambda) {
    auto arr = nlohmann::json::array();
    for (const auto& r : selected) arr.push_back({{"part_id", r.part_id}, {"distance", r.distance}});
    return {{"selected", std::move(arr)}, {"lambda", lambda}};
}

std::string ranking_csv(std::span<const RankedPart> ranking) {
    std::ostringstream out;
    out.precision(17);
    out << "rank,part_id,distance\n";
    for (std::size_t i = 0; i < ranking.size(); ++i) out << i + 1 << ',' << ranking[i].part_id << ',' << ranking[i].distance << '\n';
    return out.str();
}

}  // namespace mwand
