#include "mwand/raster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <png.h>

#include "mwand/errors.hpp"

namespace mwand {

namespace {

constexpr double kAmbient = 0.2;
constexpr double kDiffuse = 0.8;
constexpr double kBackFaceScale = 0.5;

struct ScreenVertex {
    double x, y;  // pixel coordinates, y down
    double z;     // camera-space depth
};

// Twice the signed area of (a, b, p). Written relative to p so that swapping
// a and b negates the result exactly; shared edges are then watertight.
double edge(const ScreenVertex& a, const ScreenVertex& b, double px, double py) {
    return (a.x - px) * (b.y - py) - (a.y - py) * (b.x - px);
}

bool is_top_left(const ScreenVertex& a, const ScreenVertex& b) {
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    return (dy == 0.0 && dx > 0.0) || dy < 0.0;
}

Rgb shade_color(const Rgb& albedo, double intensity) {
    Rgb out{};
    for (int c = 0; c < 3; ++c) {
        const double v = std::round(albedo[c] * intensity);
        out[c] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
    return out;
}

}  // namespace

CameraFrame camera_frame(const Camera& cam) {
    if (!(cam.near_plane > 0.0) || !(cam.near_plane < cam.far_plane)) {
        throw ConfigError("camera requires 0 < near < far");
    }
    if (!(cam.vertical_fov > 0.0) || !(cam.vertical_fov < std::numbers::pi)) {
        throw ConfigError("camera vertical fov must lie in (0, pi)");
    }
    const Vec3 dir = cam.target - cam.eye;
    if (!(norm(dir) > 0.0)) throw ConfigError("camera eye coincides with target");
    CameraFrame f;
    f.forward = normalized(dir);
    const Vec3 r = cross(f.forward, cam.up);
    if (!(norm(r) > 1e-12 * std::max(1.0, norm(cam.up)))) {
        throw ConfigError("camera up vector is parallel to the view direction");
    }
    f.right = normalized(r);
    f.up = cross(f.right, f.forward);
    return f;
}

double focal_length_pixels(const Camera& cam, int height) {
    return 0.5 * static_cast<double>(height) / std::tan(0.5 * cam.vertical_fov);
}

FrameBuffer::FrameBuffer(int w, int h)
    : width(w),
      height(h),
      color(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), kBackgroundColor),
      depth(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), std::numeric_limits<float>::infinity()),
      part_id(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), kNoPart) {}

FrameBuffer rasterize(const Mesh& mesh, std::span<const PartId> face_parts, const RenderRequest& req) {
    if (req.width < 1 || req.height < 1) throw ConfigError("framebuffer dimensions must be positive");
    if (face_parts.size() != mesh.faces.size()) throw ConfigError("face_parts must have one entry per face");
    const CameraFrame frame = camera_frame(req.camera);
    const Camera& cam = req.camera;
    const double focal = focal_length_pixels(cam, req.height);
    const double cx = 0.5 * req.width;
    const double cy = 0.5 * req.height;

    PartId max_part = -1;
    for (const auto p : face_parts) max_part = std::max(max_part, p);
    std::vector<bool> hidden(static_cast<std::size_t>(max_part + 1), false);
    for (const auto p : req.hidden) {
        if (p >= 0 && p <= max_part) hidden[static_cast<std::size_t>(p)] = true;
    }

    std::vector<Vec3> view(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Vec3 d = mesh.vertices[i] - cam.eye;
        view[i] = {dot(d, frame.right), dot(d, frame.up), dot(d, frame.forward)};
    }

    FrameBuffer fb(req.width, req.height);
    const double near_z = cam.near_plane;
    const double far_z = cam.far_plane;

    std::array<Vec3, 4> clipped{};
    std::array<ScreenVertex, 4> screen{};
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const PartId part = face_parts[f];
        if (req.only_part != kNoPart && part != req.only_part) continue;
        if (part >= 0 && hidden[static_cast<std::size_t>(part)]) continue;

        const auto& tri = mesh.faces[f];
        const Vec3 in[3] = {view[tri[0]], view[tri[1]], view[tri[2]]};

        // Sutherland-Hodgman against z >= near.
        std::size_t n = 0;
        for (int i = 0; i < 3; ++i) {
            const Vec3& a = in[i];
            const Vec3& b = in[(i + 1) % 3];
            const bool a_in = a.z >= near_z;
            const bool b_in = b.z >= near_z;
            if (a_in) clipped[n++] = a;
            if (a_in != b_in) {
                const double t = (near_z - a.z) / (b.z - a.z);
                Vec3 p = a + (b - a) * t;
                p.z = near_z;
                clipped[n++] = p;
            }
        }
        if (n < 3) continue;

        Rgb color = kBackgroundColor;
        if (req.shade) {
            const Vec3& w0 = mesh.vertices[tri[0]];
            const Vec3& w1 = mesh.vertices[tri[1]];
            const Vec3& w2 = mesh.vertices[tri[2]];
            const Vec3 normal = normalized(cross(w1 - w0, w2 - w0));
            const Vec3 centroid = (w0 + w1 + w2) / 3.0;
            const double cosang = dot(normal, normalized(cam.eye - centroid));
            double intensity = kAmbient + kDiffuse * std::abs(cosang);
            if (cosang < 0.0) intensity *= kBackFaceScale;
            color = shade_color(part == req.highlight && part != kNoPart ? kHighlightColor : kBaseAlbedo, intensity);
        }

        for (std::size_t i = 0; i < n; ++i) {
            screen[i] = {cx + focal * clipped[i].x / clipped[i].z, cy - focal * clipped[i].y / clipped[i].z,
                         clipped[i].z};
        }

        for (std::size_t k = 1; k + 1 < n; ++k) {
            ScreenVertex v0 = screen[0];
            ScreenVertex v1 = screen[k];
            ScreenVertex v2 = screen[k + 1];
            double area = edge(v0, v1, v2.x, v2.y);
            if (area == 0.0 || !std::isfinite(area)) continue;
            if (area < 0.0) {
                std::swap(v1, v2);
                area = -area;
            }
            const double min_x = std::min({v0.x, v1.x, v2.x});
            const double max_x = std::max({v0.x, v1.x, v2.x});
            const double min_y = std::min({v0.y, v1.y, v2.y});
            const double max_y = std::max({v0.y, v1.y, v2.y});
            const int x0 = std::max(0, static_cast<int>(std::ceil(std::max(min_x - 0.5, -1.0))));
            const int x1 = std::min(req.width - 1, static_cast<int>(std::floor(std::min(max_x - 0.5, 1e9))));
            const int y0 = std::max(0, static_cast<int>(std::ceil(std::max(min_y - 0.5, -1.0))));
            const int y1 = std::min(req.height - 1, static_cast<int>(std::floor(std::min(max_y - 0.5, 1e9))));
            if (x0 > x1 || y0 > y1) continue;

            const bool tl0 = is_top_left(v1, v2);
            const bool tl1 = is_top_left(v2, v0);
            const bool tl2 = is_top_left(v0, v1);
            const double inv_area = 1.0 / area;
            const double iz0 = 1.0 / v0.z;
            const double iz1 = 1.0 / v1.z;
            const double iz2 = 1.0 / v2.z;

            for (int y = y0; y <= y1; ++y) {
                const double py = y + 0.5;
                for (int x = x0; x <= x1; ++x) {
                    const double px = x + 0.5;
                    const double e0 = edge(v1, v2, px, py);
                    const double e1 = edge(v2, v0, px, py);
                    const double e2 = edge(v0, v1, px, py);
                    if (e0 < 0.0 || e1 < 0.0 || e2 < 0.0) continue;
                    if ((e0 == 0.0 && !tl0) || (e1 == 0.0 && !tl1) || (e2 == 0.0 && !tl2)) continue;
                    const double inv_z = (e0 * iz0 + e1 * iz1 + e2 * iz2) * inv_area;
                    const double z = 1.0 / inv_z;
                    if (z < near_z || z > far_z) continue;
                    const float zf = static_cast<float>(z);
                    const std::size_t idx = fb.index(x, y);
                    if (!(zf < fb.depth[idx])) continue;
                    fb.depth[idx] = zf;
                    fb.part_id[idx] = part;
                    if (req.shade) fb.color[idx] = color;
                }
            }
        }
    }
    return fb;
}

std::size_t visible_pixel_count(const FrameBuffer& fb, PartId part) {
    return static_cast<std::size_t>(std::count(fb.part_id.begin(), fb.part_id.end(), part));
}

std::vector<std::uint8_t> encode_png(const FrameBuffer& fb) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(fb.width);
    image.height = static_cast<png_uint_32>(fb.height);
    image.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> rgb;
    rgb.reserve(fb.color.size() * 3);
    for (const auto& c : fb.color) rgb.insert(rgb.end(), c.begin(), c.end());

    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, rgb.data(), 0, nullptr)) {
        throw std::runtime_error(std::string("png sizing failed: ") + image.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, rgb.data(), 0, nullptr)) {
        throw std::runtime_error(std::string("png encoding failed: ") + image.message);
    }
    out.resize(size);
    return out;
}

void write_png(const FrameBuffer& fb, const std::filesystem::path& path) {
    const auto bytes = encode_png(fb);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> encode_part_id_raw(const FrameBuffer& fb) {
    std::vector<std::uint8_t> out;
    out.reserve(fb.part_id.size() * 4);
    for (const auto id : fb.part_id) {
        const auto u = static_cast<std::uint32_t>(id);
        out.push_back(static_cast<std::uint8_t>(u & 0xFF));
        out.push_back(static_cast<std::uint8_t>((u >> 8) & 0xFF));
        out.push_back(static_cast<std::uint8_t>((u >> 16) & 0xFF));
        out.push_back(static_cast<std::uint8_t>((u >> 24) & 0xFF));
    }
    return out;
}

}  // namespace mwand
