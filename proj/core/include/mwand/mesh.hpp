#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mwand/vec3.hpp"

namespace mwand {

using PartId = std::int32_t;
using MaterialId = std::int32_t;
using Face = std::array<std::uint32_t, 3>;

inline constexpr PartId kNoPart = -1;

/// Indexed triangle mesh with a mesh-local material label per face.
struct Mesh {
    std::string name;
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    std::vector<MaterialId> face_material;
    /// Source material names indexed by MaterialId. Empty string is the
    /// implicit default used by faces that precede any `usemtl`.
    std::vector<std::string> material_names;

    bool operator==(const Mesh&) const = default;
};

/// A connected component of a vertex-merged mesh.
struct Part {
    PartId part_id = kNoPart;
    std::vector<std::uint32_t> face_ids;  // ascending
    MaterialId material_id = 0;
    Vec3 centroid;
    double max_radial_extent = 0.0;
    std::uint32_t vertex_count = 0;

    bool operator==(const Part&) const = default;
};

/// Throws StructuralError when indices are out of range or arrays disagree.
void validate(const Mesh& mesh);

/// Parses the `v` / `f` / `usemtl` subset of the Wavefront text format.
/// Polygons are fan-triangulated. Material names receive dense IDs in the
/// order a face first uses them; faces before any `usemtl` use the implicit
/// default material, which is therefore ID 0 whenever it occurs.
Mesh load_obj(std::string_view text, std::string name = {});
Mesh load_obj_file(const std::filesystem::path& path);

/// Collapses vertices with exactly equal coordinates (first occurrence kept,
/// order preserved), remaps faces and drops faces that become degenerate.
Mesh merge_vertices(const Mesh& mesh);

/// Groups faces that share at least one vertex. Part IDs follow the smallest
/// face index of each component. Material IDs are left at 0; see
/// assign_part_materials.
std::vector<Part> connected_components(const Mesh& mesh);

/// Majority vote of face materials per part, ties to the smallest ID.
std::vector<Part> assign_part_materials(const Mesh& mesh, std::vector<Part> parts);

/// merge_vertices -> connected_components -> assign_part_materials.
std::vector<Part> segment(const Mesh& mesh);

/// Unique vertex indices touched by a part, ascending.
std::vector<std::uint32_t> part_vertex_indices(const Mesh& mesh, const Part& part);

/// Centroid of the whole vertex set (unweighted).
Vec3 mesh_centroid(const Mesh& mesh);

/// Max distance from mesh_centroid to any vertex.
double mesh_bounding_radius(const Mesh& mesh);

/// Per-face part id lookup table.
std::vector<PartId> face_part_ids(const Mesh& mesh, std::span<const Part> parts);

nlohmann::json part_to_json(const Part& part);
Part part_from_json(const nlohmann::json& j);

/// Snapshot export: flat vertex/face arrays, face materials and parts.
nlohmann::json mesh_snapshot_json(const Mesh& mesh, std::span<const Part> parts);
void mesh_snapshot_from_json(const nlohmann::json& j, Mesh& mesh, std::vector<Part>& parts);

/// Writes the mesh as Wavefront text. `face_material_names[f]` selects the
/// `usemtl` block of face f; an empty name means the default block, which is
/// emitted first without any `usemtl` record. Named blocks follow in
/// lexicographic order, one block per name.
std::string write_obj(const Mesh& mesh, std::span<const std::string> face_material_names);

}  // namespace mwand
