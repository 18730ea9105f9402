#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <span>
#include <vector>

#include "mwand/mesh.hpp"

namespace mwand {

struct Camera {
    Vec3 eye;
    Vec3 target;
    Vec3 up{0.0, 0.0, 1.0};
    double vertical_fov = std::numbers::pi / 4.0;  // radians
    double near_plane = 1e-3;
    double far_plane = 1e6;

    bool operator==(const Camera&) const = default;
};

/// Orthonormal camera frame. `forward` points from eye to target.
struct CameraFrame {
    Vec3 right;
    Vec3 up;
    Vec3 forward;
};

/// Throws ConfigError for near >= far, fov outside (0, pi), eye == target or
/// an up vector parallel to the view direction.
CameraFrame camera_frame(const Camera& cam);

/// Focal length in pixels for an image of the given height.
double focal_length_pixels(const Camera& cam, int height);

using Rgb = std::array<std::uint8_t, 3>;

inline constexpr Rgb kBaseAlbedo{180, 180, 180};
inline constexpr Rgb kHighlightColor{230, 60, 30};
inline constexpr Rgb kBackgroundColor{255, 255, 255};

struct FrameBuffer {
    int width = 0;
    int height = 0;
    std::vector<Rgb> color;
    std::vector<float> depth;  // camera-space depth, +inf where empty
    std::vector<PartId> part_id;  // kNoPart (-1) for background

    FrameBuffer() = default;
    FrameBuffer(int w, int h);

    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x); }
    std::size_t pixel_count() const { return part_id.size(); }

    bool operator==(const FrameBuffer&) const = default;
};

struct RenderRequest {
    Camera camera;
    int width = 512;
    int height = 512;
    PartId highlight = kNoPart;
    /// Parts that are skipped entirely.
    std::vector<PartId> hidden;
    /// When set, every part except this one is skipped.
    PartId only_part = kNoPart;
    /// Color plane is left at the background when false (visibility passes).
    bool shade = true;
};

/// Perspective z-buffered fill with a top-left rule, near-plane clipping and
/// flat headlight Lambertian shading. Back faces are drawn at half intensity.
/// `face_parts[f]` names the part that face f belongs to.
FrameBuffer rasterize(const Mesh& mesh, std::span<const PartId> face_parts, const RenderRequest& req);

std::size_t visible_pixel_count(const FrameBuffer& fb, PartId part);

/// 8-bit RGB PNG of the color plane.
std::vector<std::uint8_t> encode_png(const FrameBuffer& fb);
void write_png(const FrameBuffer& fb, const std::filesystem::path& path);

/// Row-major int32 little-endian part-id grid.
std::vector<std::uint8_t> encode_part_id_raw(const FrameBuffer& fb);

}  // namespace mwand
