#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mwand/dedup.hpp"

namespace mwand {

enum class EmbeddingSpace { x, z };

std::string_view to_string(EmbeddingSpace space);
EmbeddingSpace embedding_space_from_string(std::string_view s);

/// -sum |a_i - b_i|, accumulated in double. Throws ConfigError on width mismatch.
double similarity(std::span<const float> a, std::span<const float> b);

/// Sum |a_i - b_i|; the quantity thresholded by selections.
double l1_distance(std::span<const float> a, std::span<const float> b);

struct RankedPart {
    PartId part_id = kNoPart;
    double distance = 0.0;

    bool operator==(const RankedPart&) const = default;
};

/// Per-mesh exemplar embeddings plus the dedup groups that map every part to
/// its exemplar. Immutable once built.
class EmbeddingIndex {
public:
    EmbeddingIndex(std::string mesh_id, DuplicateGroups groups, std::map<PartId, std::vector<float>> exemplar_vectors,
                   EmbeddingSpace space = EmbeddingSpace::x);

    const std::string& mesh_id() const { return mesh_id_; }
    const DuplicateGroups& groups() const { return groups_; }
    EmbeddingSpace space() const { return space_; }
    std::size_t part_count() const { return groups_.group_of.size(); }
    std::size_t dim() const { return dim_; }
    bool contains(PartId part) const { return part >= 0 && static_cast<std::size_t>(part) < part_count(); }

    /// The exemplar's vector for any part. Throws NotFoundError for unknown parts.
    std::span<const float> vector_of(PartId part) const;

    /// Distance from `part` to every part, indexed by part id.
    std::vector<double> distances_from(PartId part) const;

private:
    std::string mesh_id_;
    DuplicateGroups groups_;
    std::vector<std::vector<float>> group_vectors_;  // one per group
    EmbeddingSpace space_;
    std::size_t dim_ = 0;
};

/// Every other part by ascending distance to the query, ties by part id.
std::vector<RankedPart> rank_parts(const EmbeddingIndex& index, PartId query);

struct SelectionRequest {
    std::vector<PartId> query_part_ids;
    double lambda = 0.0;
};

/// Parts whose minimum distance to any query is <= lambda, queries included.
/// Sorted by distance, then part id.
std::vector<RankedPart> select_group(const EmbeddingIndex& index, const SelectionRequest& req);

/// `{"selected":[{"part_id":..,"distance":..}], "lambda":..}`
nlohmann::json selection_to_json(std::span<const RankedPart> selected, double lambda);

/// "rank,part_id,distance" rows.
std::string ranking_csv(std::span<const RankedPart> ranking);

}  // namespace mwand
