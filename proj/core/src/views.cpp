#include "mwand/views.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mwand/errors.hpp"
#include "mwand/random.hpp"

namespace mwand {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Any unit vector orthogonal to `axis`.
Vec3 perpendicular(const Vec3& axis) {
    const Vec3 helper = std::abs(axis.x) < 0.9 ? Vec3{1.0, 0.0, 0.0} : Vec3{0.0, 1.0, 0.0};
    return normalized(cross(axis, helper));
}

double effective_radius(const RenderScene& scene, const Part& part) {
    if (part.max_radial_extent > 0.0) return part.max_radial_extent;
    return std::max(scene.radius() * 1e-3, 1e-9);
}

ContextSelection evaluate_pass(const RenderScene& scene, const Part& part, double fraction, const ViewOptions& opts) {
    ContextSelection sel;
    sel.candidates = sample_hemisphere_cameras(scene, part, opts.candidates, fraction, opts);
    RenderRequest req;
    req.width = opts.resolution;
    req.height = opts.resolution;
    req.shade = false;
    sel.counts.reserve(sel.candidates.size());
    for (const auto& cam : sel.candidates) {
        req.camera = cam;
        sel.counts.push_back(visible_pixel_count(rasterize(scene.mesh(), scene.face_parts(), req), part.part_id));
    }
    sel.ranking.resize(sel.candidates.size());
    std::iota(sel.ranking.begin(), sel.ranking.end(), 0);
    std::stable_sort(sel.ranking.begin(), sel.ranking.end(), [&](int a, int b) {
        return sel.counts[static_cast<std::size_t>(a)] > sel.counts[static_cast<std::size_t>(b)];
    });
    sel.candidate_index = sel.ranking.front();
    sel.camera = sel.candidates[static_cast<std::size_t>(sel.candidate_index)];

    req.camera = sel.camera;
    req.only_part = part.part_id;
    const auto unoccluded = visible_pixel_count(rasterize(scene.mesh(), scene.face_parts(), req), part.part_id);
    const auto visible = sel.counts[static_cast<std::size_t>(sel.candidate_index)];
    sel.visibility_ratio = unoccluded == 0 ? 0.0 : static_cast<double>(visible) / static_cast<double>(unoccluded);
    return sel;
}

}  // namespace

RenderScene::RenderScene(const Mesh& mesh, std::span<const Part> parts)
    : mesh_(&mesh),
      parts_(parts),
      face_parts_(face_part_ids(mesh, parts)),
      centroid_(mesh_centroid(mesh)),
      radius_(mesh_bounding_radius(mesh)) {
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (parts[i].part_id != static_cast<PartId>(i)) throw ConfigError("parts must be indexed by part_id");
    }
}

const Part& RenderScene::part(PartId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= parts_.size()) {
        throw NotFoundError("unknown part " + std::to_string(id));
    }
    return parts_[static_cast<std::size_t>(id)];
}

double framing_distance(double radius, double fraction, double fov_rad) {
    return radius / (fraction * std::tan(0.5 * fov_rad));
}

Vec3 outward_axis(const RenderScene& scene, const Part& part) {
    const Vec3 d = part.centroid - scene.centroid();
    const double n = norm(d);
    return n < 1e-9 ? Vec3{0.0, 0.0, 1.0} : d / n;
}

std::vector<Vec3> hemisphere_directions(const Vec3& axis, int n, std::optional<std::uint64_t> random_seed) {
    if (n < 1) throw ConfigError("need at least one candidate direction");
    const Vec3 a = normalized(axis);
    const Vec3 u = perpendicular(a);
    const Vec3 v = cross(a, u);
    std::vector<Vec3> dirs;
    dirs.reserve(static_cast<std::size_t>(n));
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    std::optional<Rng> rng;
    if (random_seed) rng.emplace(*random_seed);
    for (int i = 0; i < n; ++i) {
        double cos_t = 0.0;
        double phi = 0.0;
        if (rng) {
            cos_t = rng->uniform();
            phi = 2.0 * std::numbers::pi * rng->uniform();
        } else {
            cos_t = 1.0 - static_cast<double>(i) / static_cast<double>(n);
            phi = golden * static_cast<double>(i);
        }
        const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
        dirs.push_back(normalized(a * cos_t + u * (sin_t * std::cos(phi)) + v * (sin_t * std::sin(phi))));
    }
    return dirs;
}

Camera look_from(const Vec3& target, const Vec3& direction, double distance, double fov_rad) {
    Camera cam;
    const Vec3 dir = normalized(direction);
    cam.eye = target + dir * distance;
    cam.target = target;
    cam.up = std::abs(dir.z) > 0.99 ? Vec3{0.0, 1.0, 0.0} : Vec3{0.0, 0.0, 1.0};
    cam.vertical_fov = fov_rad;
    cam.near_plane = distance * 1e-3;
    cam.far_plane = distance * 1e4;
    return cam;
}

std::vector<Camera> sample_hemisphere_cameras(const RenderScene& scene, const Part& part, int n, double fraction,
                                              const ViewOptions& opts) {
    const double fov = opts.fov_deg * kDeg;
    const double dist = framing_distance(effective_radius(scene, part), fraction, fov);
    std::vector<Camera> cams;
    for (const auto& dir : hemisphere_directions(outward_axis(scene, part), n, opts.random_seed)) {
        Camera cam = look_from(part.centroid, dir, dist, fov);
        // Far enough to include the whole mesh behind the part.
        cam.far_plane = std::max(cam.far_plane, 4.0 * (dist + scene.radius() + norm(part.centroid - scene.centroid())));
        cams.push_back(cam);
    }
    return cams;
}

ContextSelection select_context_view(const RenderScene& scene, const Part& part, const ViewOptions& opts) {
    double fraction = opts.context_fraction;
    ContextSelection sel;
    for (int zoom = 0; zoom <= opts.max_zoom_steps; ++zoom) {
        sel = evaluate_pass(scene, part, fraction, opts);
        sel.zoom_level = zoom;
        if (sel.visibility_ratio >= opts.occlusion_threshold) break;
        fraction *= 2.0;
    }
    return sel;
}

ViewSet render_view_set(const RenderScene& scene, const Part& part, const ViewOptions& opts, int candidate_rank) {
    return render_view_set(scene, part, select_context_view(scene, part, opts), opts, candidate_rank);
}

ViewSet render_view_set(const RenderScene& scene, const Part& part, const ContextSelection& selection,
                        const ViewOptions& opts, int candidate_rank) {
    const double fov = opts.fov_deg * kDeg;
    ViewSet vs;
    vs.part = part.part_id;
    vs.zoom_level = selection.zoom_level;
    vs.context_camera = selection.camera;
    if (candidate_rank > 0) {
        const auto k = static_cast<std::size_t>(candidate_rank) % selection.ranking.size();
        vs.context_camera = selection.candidates[static_cast<std::size_t>(selection.ranking[k])];
    }

    RenderRequest req;
    req.width = opts.resolution;
    req.height = opts.resolution;
    req.highlight = part.part_id;

    req.camera = vs.context_camera;
    vs.context = rasterize(scene.mesh(), scene.face_parts(), req);

    const Vec3 dir = normalized(vs.context_camera.eye - vs.context_camera.target);
    vs.isolated_camera = look_from(part.centroid, dir, framing_distance(effective_radius(scene, part), opts.isolated_fraction, fov), fov);
    vs.isolated_camera.up = vs.context_camera.up;
    req.camera = vs.isolated_camera;
    req.only_part = part.part_id;
    vs.isolated = rasterize(scene.mesh(), scene.face_parts(), req);

    const double mesh_r = scene.radius() > 0.0 ? scene.radius() : effective_radius(scene, part);
    vs.full_camera = look_from(scene.centroid(), outward_axis(scene, part), framing_distance(mesh_r, opts.full_fraction, fov), fov);
    req.camera = vs.full_camera;
    req.only_part = kNoPart;
    vs.full = rasterize(scene.mesh(), scene.face_parts(), req);
    return vs;
}

std::string_view to_string(ViewRole role) {
    switch (role) {
        case ViewRole::isolated: return "isolated";
        case ViewRole::context: return "context";
        case ViewRole::full: return "full";
    }
    return "?";
}

ViewRole view_role_from_string(std::string_view s) {
    if (s == "isolated") return ViewRole::isolated;
    if (s == "context") return ViewRole::context;
    if (s == "full") return ViewRole::full;
    throw FormatError("unknown view role '" + std::string(s) + "'");
}

}  // namespace mwand
