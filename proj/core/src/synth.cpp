#include "mwand/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "mwand/errors.hpp"
#include "mwand/io.hpp"
#include "mwand/random.hpp"

namespace mwand {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kGoldenAngle = kPi * (3.0 - 2.23606797749978969640917366873128);

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    RigidTransform out;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += a.rotation[r * 3 + k] * b.rotation[k * 3 + c];
            out.rotation[r * 3 + c] = s;
        }
    }
    out.translation = a.apply(b.translation);
    return out;
}

Vec3 random_axis(Rng& rng) {
    for (;;) {
        const Vec3 v{rng.normal(), rng.normal(), rng.normal()};
        if (norm(v) > 1e-6) return normalized(v);
    }
}

double shape_extent(const Shape& s) {
    Vec3 lo = s.vertices.front();
    Vec3 hi = lo;
    for (const auto& v : s.vertices) {
        lo = {std::min(lo.x, v.x), std::min(lo.y, v.y), std::min(lo.z, v.z)};
        hi = {std::max(hi.x, v.x), std::max(hi.y, v.y), std::max(hi.z, v.z)};
    }
    return norm(hi - lo);
}

Shape jitter_shape(const Shape& s, const JitterSpec& j, Rng& rng) {
    Shape out = s;
    const Vec3 k{rng.uniform(1.0 - j.scale, 1.0 + j.scale), rng.uniform(1.0 - j.scale, 1.0 + j.scale),
                 rng.uniform(1.0 - j.scale, 1.0 + j.scale)};
    const Vec3 axis = random_axis(rng);
    const double angle = rng.uniform(-j.rotation_deg, j.rotation_deg) * kPi / 180.0;
    const double noise = j.vertex_noise * shape_extent(s);
    const auto rot = axis_angle(axis, angle);
    for (auto& v : out.vertices) {
        Vec3 p{v.x * k.x, v.y * k.y, v.z * k.z};
        p = rot.apply(p);
        const Vec3 n{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        v = j.vertex_noise > 0.0 ? p + n * noise : p;
    }
    return out;
}

RigidTransform rotate_z(double phi) { return axis_angle({0, 0, 1}, phi); }
RigidTransform rotate_y(double a) { return axis_angle({0, 1, 0}, a); }
RigidTransform translate(const Vec3& t) { return {{1, 0, 0, 0, 1, 0, 0, 0, 1}, t}; }

/// Slightly bent plate pointing along +X.
Shape scale_shape(double length, double width, double bend) {
    Shape s;
    s.vertices = {{0, -width, 0},
                  {0, width, 0},
                  {length * 0.5, -width * 0.8, bend},
                  {length * 0.5, width * 0.8, bend},
                  {length, -width * 0.25, 0},
                  {length, width * 0.25, 0}};
    s.faces = {{0, 2, 3}, {0, 3, 1}, {2, 4, 5}, {2, 5, 3}};
    return s;
}

/// Diamond with a raised midrib pointing along +X.
Shape leaf_shape(double length, double width) {
    Shape s;
    s.vertices = {{0, 0, 0}, {length * 0.45, width, 0}, {length * 0.5, 0, width * 0.3}, {length * 0.45, -width, 0},
                  {length, 0, 0}};
    s.faces = {{0, 1, 2}, {0, 2, 3}, {1, 4, 2}, {2, 4, 3}};
    return s;
}

class ArchetypeBuilder {
public:
    ArchetypeBuilder(std::string name, const JitterSpec& jitter, Rng& rng)
        : builder_(std::move(name)), jitter_(jitter), rng_(rng) {}

    void place(const Shape& local, const RigidTransform& placement, std::string_view material) {
        const auto s = jitter_shape(local, jitter_, rng_).transformed(placement);
        builder_.add(s.vertices, s.faces, material);
        names_.insert(names_.end(), s.faces.size(), std::string(material));
    }

    Mesh canonical_mesh() {
        const auto name = builder_.mesh().name;
        return load_obj(write_obj(builder_.mesh(), names_), name);
    }

private:
    MeshBuilder builder_;
    std::vector<std::string> names_;
    JitterSpec jitter_;
    Rng& rng_;
};

void build_pinecone(ArchetypeBuilder& b, const SyntheticSpec& spec) {
    const double height = 2.0;
    b.place(cylinder_shape(0.12, 0.08, height, 12), {}, "trunk");
    const int n = spec.pinecone_scales;
    const auto scale = scale_shape(0.32, 0.1, 0.04);
    for (int i = 0; i < n; ++i) {
        const double t = (i + 0.5) / n;
        const double z = 0.1 + 1.8 * t;
        const double r = 0.12 - 0.04 * (z / height) + 0.02;
        const double phi = i * kGoldenAngle;
        const double tilt = (20.0 + 30.0 * t) * kPi / 180.0;
        const auto place = compose(rotate_z(phi), compose(translate({r, 0, 0}), rotate_y(-tilt)));
        b.place(scale, compose(translate({0, 0, z}), place), "scale");
    }
}

void build_fence(ArchetypeBuilder& b, const SyntheticSpec& spec) {
    const int n = spec.fence_slats;
    const double pitch = 0.14;
    const double half_span = (n - 1) * 0.5 * pitch;
    for (int i = 0; i < n; ++i) {
        b.place(box_shape(0.05, 0.015, 0.5), translate({(i - (n - 1) * 0.5) * pitch, 0, 0.55}), "wood");
    }
    for (const double side : {-1.0, 1.0}) {
        b.place(box_shape(0.06, 0.06, 0.65), translate({side * (half_span + 0.16), 0, 0.65}), "metal");
    }
    for (int k = 0; k < spec.fence_rails; ++k) {
        const double z = spec.fence_rails == 1 ? 0.55 : 0.3 + 0.5 * k / (spec.fence_rails - 1);
        b.place(box_shape(half_span + 0.09, 0.012, 0.03), translate({0, -0.04, z}), "paint");
    }
}

void build_plant(ArchetypeBuilder& b, const SyntheticSpec& spec, Rng& rng) {
    b.place(cylinder_shape(0.3, 0.4, 0.5, 16, true, false), {}, "ceramic");
    const int n = spec.plant_stems;
    const double stem_length = 0.8;
    const auto leaf = leaf_shape(0.35, 0.1);
    for (int s = 0; s < n; ++s) {
        const double phi = 2.0 * kPi * s / n + rng.uniform(-0.2, 0.2);
        const double lean = (15.0 + rng.uniform(0.0, 15.0)) * kPi / 180.0;
        // Stem frame: +Z along the stem, leaning outward towards phi.
        const auto frame = compose(translate({0.08 * std::cos(phi), 0.08 * std::sin(phi), 0.45}),
                                   compose(rotate_z(phi), rotate_y(lean)));
        b.place(cylinder_shape(0.02, 0.015, stem_length, 6), frame, "stem");
        for (int l = 0; l < spec.leaves_per_stem; ++l) {
            const double along = stem_length * (0.55 + 0.45 * (l + 1) / spec.leaves_per_stem);
            const double turn = kPi * l + rng.uniform(-0.3, 0.3);
            const auto leaf_place =
                compose(frame, compose(translate({0, 0, along}), compose(rotate_z(turn), rotate_y(-0.5))));
            b.place(leaf, leaf_place, "leaf");
        }
    }
}

std::vector<BenchmarkQuery> material_queries(const std::vector<Part>& parts, Rng& rng) {
    std::map<MaterialId, std::vector<PartId>> by_material;
    for (const auto& p : parts) by_material[p.material_id].push_back(p.part_id);
    std::vector<BenchmarkQuery> out;
    for (const auto& [mat, members] : by_material) {
        if (members.size() < 2) continue;
        BenchmarkQuery q;
        q.query_part = members[static_cast<std::size_t>(rng.index(members.size()))];
        for (const auto p : members) {
            if (p != q.query_part) q.positives.push_back(p);
        }
        out.push_back(std::move(q));
    }
    return out;
}

}  // namespace

Vec3 RigidTransform::apply(const Vec3& p) const {
    const auto& m = rotation;
    return {m[0] * p.x + m[1] * p.y + m[2] * p.z + translation.x, m[3] * p.x + m[4] * p.y + m[5] * p.z + translation.y,
            m[6] * p.x + m[7] * p.y + m[8] * p.z + translation.z};
}

RigidTransform axis_angle(const Vec3& axis, double radians, const Vec3& translation) {
    const Vec3 a = normalized(axis);
    const double c = std::cos(radians);
    const double s = std::sin(radians);
    const double t = 1.0 - c;
    RigidTransform out;
    out.rotation = {t * a.x * a.x + c,       t * a.x * a.y - s * a.z, t * a.x * a.z + s * a.y,
                    t * a.x * a.y + s * a.z, t * a.y * a.y + c,       t * a.y * a.z - s * a.x,
                    t * a.x * a.z - s * a.y, t * a.y * a.z + s * a.x, t * a.z * a.z + c};
    out.translation = translation;
    return out;
}

std::size_t MeshBuilder::add(std::span<const Vec3> vertices, std::span<const Face> faces, std::string_view material) {
    auto it = std::find(mesh_.material_names.begin(), mesh_.material_names.end(), material);
    const auto mat = static_cast<MaterialId>(it - mesh_.material_names.begin());
    if (it == mesh_.material_names.end()) mesh_.material_names.emplace_back(material);
    const auto base = static_cast<std::uint32_t>(mesh_.vertices.size());
    const auto start = mesh_.faces.size();
    mesh_.vertices.insert(mesh_.vertices.end(), vertices.begin(), vertices.end());
    for (const auto& f : faces) {
        mesh_.faces.push_back({f[0] + base, f[1] + base, f[2] + base});
        mesh_.face_material.push_back(mat);
    }
    return start;
}

Shape Shape::transformed(const RigidTransform& t) const {
    Shape out = *this;
    for (auto& v : out.vertices) v = t.apply(v);
    return out;
}

Shape box_shape(double hx, double hy, double hz) {
    Shape s;
    for (int i = 0; i < 8; ++i) s.vertices.push_back({(i & 1) ? hx : -hx, (i & 2) ? hy : -hy, (i & 4) ? hz : -hz});
    s.faces = {{0, 2, 3}, {0, 3, 1}, {4, 5, 7}, {4, 7, 6}, {0, 1, 5}, {0, 5, 4},
               {2, 6, 7}, {2, 7, 3}, {0, 4, 6}, {0, 6, 2}, {1, 3, 7}, {1, 7, 5}};
    return s;
}

Shape open_box_shape(double hx, double hy, double hz) {
    Shape s = box_shape(hx, hy, hz);
    s.faces.erase(s.faces.begin() + 2, s.faces.begin() + 4);
    return s;
}

Shape uv_sphere_shape(double radius, int stacks, int slices) {
    if (stacks < 2 || slices < 3) throw ConfigError("sphere needs stacks >= 2 and slices >= 3");
    Shape s;
    s.vertices.push_back({0, 0, radius});
    for (int i = 1; i < stacks; ++i) {
        const double theta = kPi * i / stacks;
        for (int j = 0; j < slices; ++j) {
            const double phi = 2.0 * kPi * j / slices;
            s.vertices.push_back({radius * std::sin(theta) * std::cos(phi), radius * std::sin(theta) * std::sin(phi),
                                  radius * std::cos(theta)});
        }
    }
    s.vertices.push_back({0, 0, -radius});
    const auto ring = [&](int i, int j) { return static_cast<std::uint32_t>(1 + (i - 1) * slices + (j % slices)); };
    const auto south = static_cast<std::uint32_t>(s.vertices.size() - 1);
    for (int j = 0; j < slices; ++j) s.faces.push_back({0, ring(1, j), ring(1, j + 1)});
    for (int i = 1; i + 1 < stacks; ++i) {
        for (int j = 0; j < slices; ++j) {
            s.faces.push_back({ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)});
            s.faces.push_back({ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)});
        }
    }
    for (int j = 0; j < slices; ++j) s.faces.push_back({south, ring(stacks - 1, j + 1), ring(stacks - 1, j)});
    return s;
}

Shape cylinder_shape(double r0, double r1, double height, int slices, bool cap_bottom, bool cap_top) {
    if (slices < 3) throw ConfigError("cylinder needs at least 3 slices");
    Shape s;
    for (int j = 0; j < slices; ++j) {
        const double phi = 2.0 * kPi * j / slices;
        s.vertices.push_back({r0 * std::cos(phi), r0 * std::sin(phi), 0.0});
    }
    for (int j = 0; j < slices; ++j) {
        const double phi = 2.0 * kPi * j / slices;
        s.vertices.push_back({r1 * std::cos(phi), r1 * std::sin(phi), height});
    }
    const auto n = static_cast<std::uint32_t>(slices);
    for (std::uint32_t j = 0; j < n; ++j) {
        const auto k = (j + 1) % n;
        s.faces.push_back({j, k, n + k});
        s.faces.push_back({j, n + k, n + j});
    }
    if (cap_bottom) {
        const auto c = static_cast<std::uint32_t>(s.vertices.size());
        s.vertices.push_back({0, 0, 0});
        for (std::uint32_t j = 0; j < n; ++j) s.faces.push_back({c, (j + 1) % n, j});
    }
    if (cap_top) {
        const auto c = static_cast<std::uint32_t>(s.vertices.size());
        s.vertices.push_back({0, 0, height});
        for (std::uint32_t j = 0; j < n; ++j) s.faces.push_back({c, n + j, n + (j + 1) % n});
    }
    return s;
}

std::string_view to_string(Archetype a) {
    switch (a) {
        case Archetype::pinecone: return "pinecone";
        case Archetype::fence: return "fence";
        case Archetype::plant: return "plant";
    }
    return "?";
}

Archetype archetype_from_string(std::string_view s) {
    if (s == "pinecone") return Archetype::pinecone;
    if (s == "fence") return Archetype::fence;
    if (s == "plant") return Archetype::plant;
    throw ConfigError("unknown archetype '" + std::string(s) + "' (expected pinecone, fence or plant)");
}

void SyntheticSpec::validate() const {
    if (mesh_count < 1) throw ConfigError("mesh_count must be at least 1");
    if (archetypes.empty()) throw ConfigError("at least one archetype is required");
    if (pinecone_scales < 1) throw ConfigError("pinecone_scales must be at least 1");
    if (fence_slats < 1) throw ConfigError("fence_slats must be at least 1");
    if (fence_rails < 0) throw ConfigError("fence_rails must be non-negative");
    if (plant_stems < 1) throw ConfigError("plant_stems must be at least 1");
    if (leaves_per_stem < 0) throw ConfigError("leaves_per_stem must be non-negative");
    if (!(jitter.scale >= 0.0 && jitter.scale < 1.0)) throw ConfigError("jitter scale must lie in [0, 1)");
    if (!(jitter.rotation_deg >= 0.0 && jitter.rotation_deg <= 180.0)) {
        throw ConfigError("jitter rotation must lie in [0, 180] degrees");
    }
    if (!(jitter.vertex_noise >= 0.0 && jitter.vertex_noise < 0.5)) throw ConfigError("vertex noise must lie in [0, 0.5)");
}

SyntheticMesh generate_archetype(Archetype a, std::uint64_t seed, const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(seed);
    ArchetypeBuilder b(std::string(to_string(a)) + "_" + std::to_string(seed % 100000), spec.jitter, rng);
    switch (a) {
        case Archetype::pinecone: build_pinecone(b, spec); break;
        case Archetype::fence: build_fence(b, spec); break;
        case Archetype::plant: build_plant(b, spec, rng); break;
    }
    SyntheticMesh out;
    out.archetype = a;
    out.mesh = b.canonical_mesh();
    out.parts = segment(out.mesh);
    for (const auto& p : out.parts) out.part_materials.push_back(p.material_id);
    out.queries = material_queries(out.parts, rng);
    return out;
}

SyntheticBenchmark generate_synthetic_benchmark(std::uint64_t seed, const SyntheticSpec& spec) {
    spec.validate();
    SyntheticBenchmark bench;
    for (int i = 0; i < spec.mesh_count; ++i) {
        const auto a = spec.archetypes[static_cast<std::size_t>(i) % spec.archetypes.size()];
        auto m = generate_archetype(a, mix_seed(seed, static_cast<std::uint64_t>(i)), spec);
        m.mesh.name = std::string(to_string(a)) + "_" + std::to_string(i);
        bench.meshes.push_back(std::move(m));
    }
    return bench;
}

void write_synthetic_benchmark(const SyntheticBenchmark& bench, const std::filesystem::path& dir) {
    std::vector<BenchmarkMesh> entries;
    auto materials = nlohmann::json::array();
    for (const auto& m : bench.meshes) {
        const auto file = m.mesh.name + ".obj";
        std::vector<std::string> names;
        names.reserve(m.mesh.faces.size());
        for (const auto mat : m.mesh.face_material) names.push_back(m.mesh.material_names[static_cast<std::size_t>(mat)]);
        write_file(dir / file, write_obj(m.mesh, names));
        entries.push_back({file, m.queries});
        materials.push_back({{"mesh", file},
                             {"archetype", to_string(m.archetype)},
                             {"material_names", m.mesh.material_names},
                             {"part_materials", m.part_materials}});
    }
    write_json(dir / "bench.json", benchmark_to_json(entries));
    write_json(dir / "materials.json", materials);
}

Mesh cube_mesh(std::string_view material) {
    MeshBuilder b("cube");
    const auto s = box_shape(0.5, 0.5, 0.5);
    b.add(s.vertices, s.faces, material);
    return b.take();
}

Mesh sphere_mesh(double radius, int stacks, int slices) {
    MeshBuilder b("sphere");
    const auto s = uv_sphere_shape(radius, stacks, slices);
    b.add(s.vertices, s.faces, "default");
    return b.take();
}

Mesh fence_mesh() {
    MeshBuilder b("fence");
    const int n = 8;
    const double pitch = 0.14;
    const auto slat = box_shape(0.05, 0.015, 0.5);
    for (int i = 0; i < n; ++i) {
        const auto s = slat.transformed(translate({(i - (n - 1) * 0.5) * pitch, 0, 0.55}));
        b.add(s.vertices, s.faces, "wood");
    }
    const auto post = box_shape(0.06, 0.06, 0.65);
    for (const double side : {-1.0, 1.0}) {
        const auto s = post.transformed(translate({side * ((n - 1) * 0.5 * pitch + 0.16), 0, 0.65}));
        b.add(s.vertices, s.faces, "metal");
    }
    return b.take();
}

Mesh enclosed_part_mesh() {
    MeshBuilder b("enclosed");
    const auto box = open_box_shape(1.0, 1.0, 1.0);
    b.add(box.vertices, box.faces, "box");
    const auto cube = box_shape(0.2, 0.2, 0.2);
    b.add(cube.vertices, cube.faces, "cube");
    return b.take();
}

DedupFixture dedup_fixture(std::uint64_t seed, std::span<const int> copies) {
    Rng rng(seed);
    std::vector<Shape> bases;
    for (std::size_t b = 0; b < copies.size(); ++b) {
        auto s = uv_sphere_shape(1.0, 4 + static_cast<int>(b % 3), 5 + static_cast<int>(b % 4));
        const double size = std::pow(1.06, static_cast<double>(b));
        for (auto& v : s.vertices) v = v * (size * rng.uniform(0.7, 1.3));
        bases.push_back(std::move(s));
    }
    std::vector<std::pair<int, int>> order;  // (base, copy)
    for (std::size_t b = 0; b < copies.size(); ++b) {
        for (int k = 0; k < copies[b]; ++k) order.emplace_back(static_cast<int>(b), k);
    }
    std::span<std::pair<int, int>> view(order);
    rng.shuffle(view);
    DedupFixture out;
    MeshBuilder builder("dedup");
    const double spacing = 12.0;
    const auto grid = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(order.size()))));
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto cell = static_cast<int>(i);
        const Vec3 at{spacing * (cell % std::max(grid, 1)), spacing * (cell / std::max(grid, 1)), rng.uniform(-1.0, 1.0)};
        const auto motion = axis_angle(random_axis(rng), rng.uniform(0.0, 2.0 * kPi), at);
        const auto s = bases[static_cast<std::size_t>(order[i].first)].transformed(motion);
        builder.add(s.vertices, s.faces, "m" + std::to_string(order[i].first));
        out.base_of_part.push_back(order[i].first);
    }
    out.mesh = builder.take();
    return out;
}

}  // namespace mwand
