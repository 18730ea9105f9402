#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "mwand/mesh.hpp"

namespace mwand {

/// Radial vertex-distance histogram of a part.
struct Descriptor {
    std::vector<double> histogram;  // normalized to sum 1, or all zero for a zero-extent part
    std::uint32_t vertex_count = 0;
    double max_radial_extent = 0.0;
};

struct DedupTolerances {
    int bins = 64;
    double histogram_l1 = 1e-2;
    double scale = 1e-2;
    double vertex_count = 0.05;  // strict: relative difference must be below this
};

struct DuplicateGroup {
    PartId exemplar = kNoPart;
    std::vector<PartId> members;  // ascending, includes the exemplar

    bool operator==(const DuplicateGroup&) const = default;
};

struct DuplicateGroups {
    std::vector<DuplicateGroup> groups;
    std::vector<std::size_t> group_of;  // indexed by part_id

    std::size_t group_index(PartId part) const { return group_of.at(static_cast<std::size_t>(part)); }
    PartId exemplar_of(PartId part) const { return groups[group_index(part)].exemplar; }
    bool is_exemplar(PartId part) const { return exemplar_of(part) == part; }

    bool operator==(const DuplicateGroups&) const = default;
};

/// Distances of the part's unique vertices to its centroid, scaled by the
/// max radial extent and binned over [0, 1] (last bin right-inclusive).
Descriptor radial_histogram(const Part& part, const Mesh& mesh, int bins = 64);

/// |a - b| / max(a, b), with 0 when both are zero.
double relative_difference(double a, double b);

bool is_duplicate(const Descriptor& a, const Descriptor& b, const DedupTolerances& tol = {});

/// Greedy exemplar grouping in ascending part_id order: each part joins the
/// first group whose exemplar it duplicates, otherwise it founds a group.
DuplicateGroups group_duplicates(std::span<const Part> parts, const Mesh& mesh, const DedupTolerances& tol = {});

/// Replaces each group's exemplar with a seeded uniform pick among its members.
DuplicateGroups choose_random_exemplars(DuplicateGroups groups, std::uint64_t seed);

/// Groups where every part is its own exemplar.
DuplicateGroups singleton_groups(std::size_t part_count);

/// `[{exemplar, members:[...]}]`
nlohmann::json groups_to_json(const DuplicateGroups& groups);
DuplicateGroups groups_from_json(const nlohmann::json& j, std::size_t part_count);

}  // namespace mwand
