#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mwand/mesh.hpp"
#include "mwand/raster.hpp"

namespace mwand {

struct ViewOptions {
    int resolution = 512;
    int candidates = 16;
    double fov_deg = 45.0;
    double occlusion_threshold = 0.3;
    int max_zoom_steps = 3;
    double context_fraction = 0.25;
    double isolated_fraction = 0.5;
    double full_fraction = 0.45;
    /// Seeded uniform hemisphere sampling instead of the Fibonacci spiral.
    std::optional<std::uint64_t> random_seed;
};

/// Mesh plus the per-face part lookup and bounds shared by every render.
class RenderScene {
public:
    RenderScene(const Mesh& mesh, std::span<const Part> parts);

    const Mesh& mesh() const { return *mesh_; }
    std::span<const Part> parts() const { return parts_; }
    const Part& part(PartId id) const;
    std::span<const PartId> face_parts() const { return face_parts_; }
    const Vec3& centroid() const { return centroid_; }
    double radius() const { return radius_; }

private:
    const Mesh* mesh_;
    std::span<const Part> parts_;
    std::vector<PartId> face_parts_;
    Vec3 centroid_;
    double radius_;
};

/// Camera distance at which a sphere of radius r spans `fraction` of the
/// vertical image extent: r / (fraction * tan(fov / 2)).
double framing_distance(double radius, double fraction, double fov_rad);

/// Unit vector from the mesh centroid to the part centroid, +Z when the two
/// coincide (norm below 1e-9).
Vec3 outward_axis(const RenderScene& scene, const Part& part);

/// Unit directions on the hemisphere around `axis`. Spiral direction i has
/// cos(polar angle) = 1 - i/n, so n = 1 yields the axis itself.
std::vector<Vec3> hemisphere_directions(const Vec3& axis, int n, std::optional<std::uint64_t> random_seed = {});

/// Camera looking at `target` from `target + direction * distance`.
Camera look_from(const Vec3& target, const Vec3& direction, double distance, double fov_rad);

/// Candidate context cameras for the part at the given framing fraction.
std::vector<Camera> sample_hemisphere_cameras(const RenderScene& scene, const Part& part, int n,
                                              double fraction, const ViewOptions& opts = {});

struct ContextSelection {
    Camera camera;
    int zoom_level = 0;
    int candidate_index = 0;
    double visibility_ratio = 0.0;
    /// Visible pixel counts of every candidate in the returned pass.
    std::vector<std::size_t> counts;
    /// Candidate indices of the returned pass sorted by descending count, ties by index.
    std::vector<int> ranking;
    std::vector<Camera> candidates;
};

/// Best-visibility context camera. Each pass frames the part at
/// fraction * 2^zoom; a pass is accepted once the best candidate's visible
/// pixels reach the occlusion threshold relative to the same view with every
/// other part hidden, otherwise the camera moves in, up to max_zoom_steps.
ContextSelection select_context_view(const RenderScene& scene, const Part& part, const ViewOptions& opts = {});

struct ViewSet {
    PartId part = kNoPart;
    FrameBuffer isolated;
    FrameBuffer context;
    FrameBuffer full;
    Camera isolated_camera;
    Camera context_camera;
    Camera full_camera;
    int zoom_level = 0;
};

/// The three canonical renders. `candidate_rank` > 0 substitutes the k-th
/// best context candidate, used to produce extra training viewpoints.
ViewSet render_view_set(const RenderScene& scene, const Part& part, const ViewOptions& opts = {},
                        int candidate_rank = 0);

/// Same as above with an already computed selection (skips the search).
ViewSet render_view_set(const RenderScene& scene, const Part& part, const ContextSelection& selection,
                        const ViewOptions& opts, int candidate_rank = 0);

enum class ViewRole { isolated, context, full };

std::string_view to_string(ViewRole role);
ViewRole view_role_from_string(std::string_view s);

}  // namespace mwand
