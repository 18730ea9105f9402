#include "mwand/mesh.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "mwand/errors.hpp"

namespace mwand {

namespace {

struct VertexKey {
    std::uint64_t x, y, z;
    bool operator==(const VertexKey&) const = default;
};

struct VertexKeyHash {
    std::size_t operator()(const VertexKey& k) const noexcept {
        std::uint64_t h = k.x * 0x9E3779B97F4A7C15ull;
        h ^= k.y + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
        h ^= k.z + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
        return static_cast<std::size_t>(h);
    }
};

// +0.0 folds -0.0 onto 0.0 so numerically equal coordinates share a key.
VertexKey key_of(const Vec3& v) {
    return {std::bit_cast<std::uint64_t>(v.x + 0.0), std::bit_cast<std::uint64_t>(v.y + 0.0),
            std::bit_cast<std::uint64_t>(v.z + 0.0)};
}

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0u); }

    std::uint32_t find(std::uint32_t a) {
        while (parent_[a] != a) {
            parent_[a] = parent_[parent_[a]];
            a = parent_[a];
        }
        return a;
    }

    void unite(std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (a < b) std::swap(a, b);
        parent_[a] = b;
    }

private:
    std::vector<std::uint32_t> parent_;
};

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

double parse_double(std::string_view s, std::size_t line) {
    double value = 0.0;
    const auto* first = s.data();
    if (!s.empty() && s.front() == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ParseError("invalid number '" + std::string(s) + "'", line);
    }
    return value;
}

long long parse_index(std::string_view s, std::size_t line) {
    // "v", "v/vt", "v//vn", "v/vt/vn": only the position index matters.
    const auto slash = s.find('/');
    const auto head = s.substr(0, slash);
    long long value = 0;
    const auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), value);
    if (head.empty() || ec != std::errc{} || ptr != head.data() + head.size() || value == 0) {
        throw ParseError("invalid face index '" + std::string(s) + "'", line);
    }
    return value;
}

}  // namespace

void validate(const Mesh& mesh) {
    if (mesh.faces.empty()) throw StructuralError("mesh has no faces");
    if (mesh.face_material.size() != mesh.faces.size()) {
        throw StructuralError("face_material size " + std::to_string(mesh.face_material.size()) +
                              " != face count " + std::to_string(mesh.faces.size()));
    }
    const auto n = mesh.vertices.size();
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        for (const auto idx : mesh.faces[f]) {
            if (idx >= n) {
                throw StructuralError("face " + std::to_string(f) + " references vertex " +
                                      std::to_string(idx) + " of " + std::to_string(n));
            }
        }
    }
}

Mesh load_obj(std::string_view text, std::string name) {
    Mesh mesh;
    mesh.name = std::move(name);
    std::map<std::string, MaterialId, std::less<>> material_ids;
    std::string current_material;  // "" = default until the first usemtl

    auto material_for_face = [&]() {
        auto it = material_ids.find(current_material);
        if (it == material_ids.end()) {
            const auto id = static_cast<MaterialId>(mesh.material_names.size());
            it = material_ids.emplace(current_material, id).first;
            mesh.material_names.push_back(current_material);
        }
        return it->second;
    };

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        const auto tokens = split_ws(line);
        if (tokens.empty()) {
            if (end == text.size()) break;
            continue;
        }
        const auto kw = tokens[0];
        if (kw == "v") {
            if (tokens.size() < 4) throw ParseError("vertex record needs 3 coordinates", line_no);
            mesh.vertices.push_back({parse_double(tokens[1], line_no), parse_double(tokens[2], line_no),
                                     parse_double(tokens[3], line_no)});
        } else if (kw == "f") {
            if (tokens.size() < 4) throw ParseError("face record needs at least 3 vertices", line_no);
            std::vector<std::uint32_t> poly;
            poly.reserve(tokens.size() - 1);
            const auto nverts = static_cast<long long>(mesh.vertices.size());
            for (std::size_t t = 1; t < tokens.size(); ++t) {
                long long idx = parse_index(tokens[t], line_no);
                idx = idx > 0 ? idx - 1 : nverts + idx;
                if (idx < 0 || idx >= nverts) {
                    throw StructuralError("line " + std::to_string(line_no) + ": face index " +
                                          std::string(tokens[t]) + " out of range (" +
                                          std::to_string(nverts) + " vertices)");
                }
                poly.push_back(static_cast<std::uint32_t>(idx));
            }
            const auto mat = material_for_face();
            for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
                mesh.faces.push_back({poly[0], poly[k], poly[k + 1]});
                mesh.face_material.push_back(mat);
            }
        } else if (kw == "usemtl") {
            if (tokens.size() < 2) throw ParseError("usemtl without a name", line_no);
            current_material = std::string(tokens[1]);
        } else if (kw == "vn" || kw == "vt" || kw == "vp" || kw == "mtllib" || kw == "o" || kw == "g" ||
                   kw == "s" || kw == "l" || kw == "p") {
            // not used for untextured geometry
        } else {
            throw ParseError("unknown record '" + std::string(kw.substr(0, 32)) + "'", line_no);
        }
        if (end == text.size()) break;
    }
    validate(mesh);
    return mesh;
}

Mesh load_obj_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_obj(ss.str(), path.stem().string());
}

Mesh merge_vertices(const Mesh& mesh) {
    Mesh out;
    out.name = mesh.name;
    out.material_names = mesh.material_names;
    std::unordered_map<VertexKey, std::uint32_t, VertexKeyHash> seen;
    seen.reserve(mesh.vertices.size());
    std::vector<std::uint32_t> remap(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        const auto [it, inserted] =
            seen.try_emplace(key_of(mesh.vertices[i]), static_cast<std::uint32_t>(out.vertices.size()));
        if (inserted) out.vertices.push_back(mesh.vertices[i]);
        remap[i] = it->second;
    }
    out.faces.reserve(mesh.faces.size());
    out.face_material.reserve(mesh.faces.size());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const Face r{remap[mesh.faces[f][0]], remap[mesh.faces[f][1]], remap[mesh.faces[f][2]]};
        if (r[0] == r[1] || r[1] == r[2] || r[0] == r[2]) continue;
        out.faces.push_back(r);
        out.face_material.push_back(mesh.face_material[f]);
    }
    return out;
}

std::vector<std::uint32_t> part_vertex_indices(const Mesh& mesh, const Part& part) {
    std::vector<std::uint32_t> verts;
    verts.reserve(part.face_ids.size() * 3);
    for (const auto f : part.face_ids) {
        for (const auto v : mesh.faces[f]) verts.push_back(v);
    }
    std::sort(verts.begin(), verts.end());
    verts.erase(std::unique(verts.begin(), verts.end()), verts.end());
    return verts;
}

std::vector<Part> connected_components(const Mesh& mesh) {
    DisjointSets sets(mesh.vertices.size());
    for (const auto& f : mesh.faces) {
        sets.unite(f[0], f[1]);
        sets.unite(f[0], f[2]);
    }
    std::vector<Part> parts;
    std::unordered_map<std::uint32_t, PartId> root_to_part;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto root = sets.find(mesh.faces[f][0]);
        auto [it, inserted] = root_to_part.try_emplace(root, static_cast<PartId>(parts.size()));
        if (inserted) {
            parts.emplace_back();
            parts.back().part_id = it->second;
        }
        parts[static_cast<std::size_t>(it->second)].face_ids.push_back(static_cast<std::uint32_t>(f));
    }
    for (auto& part : parts) {
        const auto verts = part_vertex_indices(mesh, part);
        Vec3 sum;
        for (const auto v : verts) sum += mesh.vertices[v];
        part.vertex_count = static_cast<std::uint32_t>(verts.size());
        part.centroid = sum / static_cast<double>(verts.size());
        double extent = 0.0;
        for (const auto v : verts) extent = std::max(extent, norm(mesh.vertices[v] - part.centroid));
        part.max_radial_extent = extent;
    }
    return parts;
}

std::vector<Part> assign_part_materials(const Mesh& mesh, std::vector<Part> parts) {
    for (auto& part : parts) {
        std::map<MaterialId, std::size_t> votes;
        for (const auto f : part.face_ids) ++votes[mesh.face_material[f]];
        MaterialId best = 0;
        std::size_t best_count = 0;
        // std::map iterates ascending, so strict '>' keeps the smallest ID on ties.
        for (const auto& [mat, count] : votes) {
            if (count > best_count) {
                best = mat;
                best_count = count;
            }
        }
        part.material_id = best;
    }
    return parts;
}

std::vector<Part> segment(const Mesh& mesh) {
    return assign_part_materials(mesh, connected_components(mesh));
}

Vec3 mesh_centroid(const Mesh& mesh) {
    Vec3 sum;
    for (const auto& v : mesh.vertices) sum += v;
    return mesh.vertices.empty() ? sum : sum / static_cast<double>(mesh.vertices.size());
}

double mesh_bounding_radius(const Mesh& mesh) {
    const auto c = mesh_centroid(mesh);
    double r = 0.0;
    for (const auto& v : mesh.vertices) r = std::max(r, norm(v - c));
    return r;
}

std::vector<PartId> face_part_ids(const Mesh& mesh, std::span<const Part> parts) {
    std::vector<PartId> out(mesh.faces.size(), kNoPart);
    for (const auto& part : parts) {
        for (const auto f : part.face_ids) out[f] = part.part_id;
    }
    return out;
}

nlohmann::json part_to_json(const Part& part) {
    return {{"part_id", part.part_id},
            {"face_ids", part.face_ids},
            {"material_id", part.material_id},
            {"centroid", {part.centroid.x, part.centroid.y, part.centroid.z}},
            {"extent", part.max_radial_extent},
            {"vertex_count", part.vertex_count}};
}

Part part_from_json(const nlohmann::json& j) {
    Part p;
    p.part_id = j.at("part_id").get<PartId>();
    p.face_ids = j.at("face_ids").get<std::vector<std::uint32_t>>();
    p.material_id = j.at("material_id").get<MaterialId>();
    const auto c = j.at("centroid").get<std::vector<double>>();
    if (c.size() != 3) throw FormatError("part centroid must have 3 components");
    p.centroid = {c[0], c[1], c[2]};
    p.max_radial_extent = j.at("extent").get<double>();
    p.vertex_count = j.value("vertex_count", 0u);
    return p;
}

nlohmann::json mesh_snapshot_json(const Mesh& mesh, std::span<const Part> parts) {
    std::vector<double> verts;
    verts.reserve(mesh.vertices.size() * 3);
    for (const auto& v : mesh.vertices) {
        verts.push_back(v.x);
        verts.push_back(v.y);
        verts.push_back(v.z);
    }
    std::vector<std::uint32_t> faces;
    faces.reserve(mesh.faces.size() * 3);
    for (const auto& f : mesh.faces) faces.insert(faces.end(), f.begin(), f.end());
    auto jparts = nlohmann::json::array();
    for (const auto& p : parts) jparts.push_back(part_to_json(p));
    return {{"name", mesh.name},
            {"vertices", verts},
            {"faces", faces},
            {"face_material", mesh.face_material},
            {"material_names", mesh.material_names},
            {"parts", jparts}};
}

void mesh_snapshot_from_json(const nlohmann::json& j, Mesh& mesh, std::vector<Part>& parts) {
    mesh = Mesh{};
    mesh.name = j.value("name", std::string{});
    const auto verts = j.at("vertices").get<std::vector<double>>();
    const auto faces = j.at("faces").get<std::vector<std::uint32_t>>();
    if (verts.size() % 3 != 0 || faces.size() % 3 != 0) {
        throw FormatError("snapshot vertex/face arrays must be multiples of 3");
    }
    for (std::size_t i = 0; i < verts.size(); i += 3) mesh.vertices.push_back({verts[i], verts[i + 1], verts[i + 2]});
    for (std::size_t i = 0; i < faces.size(); i += 3) mesh.faces.push_back({faces[i], faces[i + 1], faces[i + 2]});
    mesh.face_material = j.at("face_material").get<std::vector<MaterialId>>();
    mesh.material_names = j.value("material_names", std::vector<std::string>{});
    validate(mesh);
    parts.clear();
    for (const auto& jp : j.at("parts")) parts.push_back(part_from_json(jp));
}

std::string write_obj(const Mesh& mesh, std::span<const std::string> face_material_names) {
    if (face_material_names.size() != mesh.faces.size()) {
        throw StructuralError("one material name per face required");
    }
    std::string out;
    char buf[128];
    for (const auto& v : mesh.vertices) {
        const int n = std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x, v.y, v.z);
        out.append(buf, static_cast<std::size_t>(n));
    }
    std::map<std::string, std::vector<std::size_t>> blocks;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) blocks[face_material_names[f]].push_back(f);
    for (const auto& [name, faces] : blocks) {
        if (!name.empty()) out += "usemtl " + name + "\n";
        for (const auto f : faces) {
            const auto& t = mesh.faces[f];
            const int n = std::snprintf(buf, sizeof(buf), "f %u %u %u\n", t[0] + 1, t[1] + 1, t[2] + 1);
            out.append(buf, static_cast<std::size_t>(n));
        }
    }
    return out;
}

}  // namespace mwand
