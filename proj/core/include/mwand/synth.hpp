#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mwand/evalkit.hpp"
#include "mwand/mesh.hpp"

namespace mwand {

/// Row-major rotation plus translation.
struct RigidTransform {
    std::array<double, 9> rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};
    Vec3 translation;

    Vec3 apply(const Vec3& p) const;
};

RigidTransform axis_angle(const Vec3& axis, double radians, const Vec3& translation = {});

/// Accumulates parts into one mesh. Parts never share vertices.
class MeshBuilder {
public:
    explicit MeshBuilder(std::string name = {}) { mesh_.name = std::move(name); }

    /// Appends a part and returns the face range start. `material` is interned.
    std::size_t add(std::span<const Vec3> vertices, std::span<const Face> faces, std::string_view material);

    std::size_t face_count() const { return mesh_.faces.size(); }
    const Mesh& mesh() const { return mesh_; }
    Mesh take() { return std::move(mesh_); }

private:
    Mesh mesh_;
};

/// Simple geometry in local coordinates.
struct Shape {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;

    Shape transformed(const RigidTransform& t) const;
};

Shape box_shape(double hx, double hy, double hz);
Shape uv_sphere_shape(double radius, int stacks, int slices);
/// Closed cylinder along +Z from z=0 to z=height, radii may differ (frustum).
Shape cylinder_shape(double r0, double r1, double height, int slices, bool cap_bottom = true, bool cap_top = true);
/// Five faces of an axis-aligned box; the +Z side is open.
Shape open_box_shape(double hx, double hy, double hz);

/// Per-part jitter applied in the part's local frame before placement.
struct JitterSpec {
    double scale = 0.2;          // per-axis factor in [1 - s, 1 + s]
    double rotation_deg = 15.0;  // about a random axis
    double vertex_noise = 0.01;  // fraction of the part extent, per coordinate

    static JitterSpec none() { return {0.0, 0.0, 0.0}; }
};

enum class Archetype { pinecone, fence, plant };

std::string_view to_string(Archetype a);
Archetype archetype_from_string(std::string_view s);

struct SyntheticSpec {
    int mesh_count = 10;
    std::vector<Archetype> archetypes{Archetype::pinecone, Archetype::fence, Archetype::plant};
    int pinecone_scales = 60;
    int fence_slats = 8;
    int fence_rails = 2;
    int plant_stems = 5;
    int leaves_per_stem = 2;
    JitterSpec jitter;

    /// Throws ConfigError.
    void validate() const;
};

struct SyntheticMesh {
    Archetype archetype = Archetype::pinecone;
    Mesh mesh;
    std::vector<Part> parts;                 // segment(mesh)
    std::vector<MaterialId> part_materials;  // ground truth by part id
    std::vector<BenchmarkQuery> queries;     // one per material group of size >= 2
};

struct SyntheticBenchmark {
    std::vector<SyntheticMesh> meshes;
};

SyntheticMesh generate_archetype(Archetype a, std::uint64_t seed, const SyntheticSpec& spec);

/// Mesh i uses archetype i mod |archetypes| and a seed derived from (seed, i).
SyntheticBenchmark generate_synthetic_benchmark(std::uint64_t seed, const SyntheticSpec& spec = {});

/// Writes `<name>.obj` per mesh, `bench.json` (mesh paths relative to `dir`)
/// and `materials.json` with the ground-truth material of every part.
void write_synthetic_benchmark(const SyntheticBenchmark& bench, const std::filesystem::path& dir);

// Fixtures.

Mesh cube_mesh(std::string_view material = "wood");
Mesh sphere_mesh(double radius = 1.0, int stacks = 12, int slices = 24);
/// 8 slats between 2 posts, all disjoint: 10 parts.
Mesh fence_mesh();
/// A small cube inside a box open towards +Z.
Mesh enclosed_part_mesh();

/// `bases` distinct random parts, base b copied `copies[b]` times under random
/// rigid motions and laid out on a grid. Returns the mesh and the expected
/// group of every part in creation order.
struct DedupFixture {
    Mesh mesh;
    std::vector<int> base_of_part;  // indexed by creation order == part id
};
DedupFixture dedup_fixture(std::uint64_t seed, std::span<const int> copies);

}  // namespace mwand
