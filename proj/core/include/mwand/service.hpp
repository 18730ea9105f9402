#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "mwand/pipeline.hpp"

namespace mwand {

enum class SessionStatus { ingesting, ready, failed };

std::string_view to_string(SessionStatus s);

struct ServiceOptions {
    std::filesystem::path data_dir = "mwand-data";
    PipelineConfig pipeline;  // views, dedup, backend, head checkpoint, space, jobs
};

/// Binary geometry: u32 LE header length, JSON header padded to a 4-byte
/// boundary, then f32 vertex xyz, u32 triangle indices and u32 per-face part
/// ids. Header `buffers` gives each array's byte offset and element count
/// relative to the payload start.
std::string encode_geometry(const Mesh& mesh, std::span<const Part> parts);

struct DecodedGeometry {
    nlohmann::json header;
    std::vector<float> vertices;
    std::vector<std::uint32_t> indices;
    std::vector<std::uint32_t> face_parts;
};
DecodedGeometry decode_geometry(std::string_view bytes);

/// Sessions keyed by content hash. Ingest runs on a background thread; reads
/// are concurrent, assignment writes are serialized per session and appended
/// to `<data_dir>/<id>/assignments.jsonl`, which is replayed on re-ingest.
class MaterialService {
public:
    explicit MaterialService(ServiceOptions options);
    ~MaterialService();

    MaterialService(const MaterialService&) = delete;
    MaterialService& operator=(const MaterialService&) = delete;

    /// Returns the mesh id; identical bytes map to the same id without recompute.
    std::string create_session(std::string bytes);

    /// Blocks until the session leaves `ingesting`.
    SessionStatus wait(const std::string& id);

    /// `{mesh_id, status[, reason][, parts, exemplars]}`. Throws NotFoundError.
    nlohmann::json status(const std::string& id) const;

    // The following throw NotFoundError for unknown ids or parts and
    // ConflictError while the session is not ready.
    nlohmann::json parts(const std::string& id) const;
    std::string geometry(const std::string& id) const;

    struct ViewImage {
        std::string png;
        PartId served_part = kNoPart;  // the exemplar whose renders are returned
        bool exemplar = false;         // true when served_part differs from the request
    };
    ViewImage view_image(const std::string& id, PartId part, ViewRole role) const;

    /// Body `{query_part_ids:[...], lambda}`; RequestError on malformed bodies.
    nlohmann::json query(const std::string& id, const nlohmann::json& body) const;

    /// Body `{part_ids:[...], material}`; all-or-nothing. Returns the assignment map.
    nlohmann::json assign(const std::string& id, const nlohmann::json& body);

    /// `{"<part_id>": "<material>"}` for assigned parts.
    nlohmann::json assignments(const std::string& id) const;

    /// Wavefront text with one `usemtl` block per assigned material.
    std::string export_obj(const std::string& id) const;

private:
    struct Session;
    std::shared_ptr<Session> find(const std::string& id) const;
    std::shared_ptr<Session> ready(const std::string& id) const;
    void ingest(const std::shared_ptr<Session>& s);

    ServiceOptions options_;
    std::optional<ProjectionHead> head_;
    mutable std::mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::vector<std::thread> workers_;
};

/// HTTP front end over MaterialService.
class HttpServer {
public:
    explicit HttpServer(MaterialService& service);
    ~HttpServer();

    /// Binds (port 0 picks a free port) and serves on a background thread.
    int start(const std::string& host, int port);
    /// Serves on the calling thread until stop().
    void listen(const std::string& host, int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace mwand
