#include "mwand/service.hpp"

#include <chrono>
#include <condition_variable>
#include <fstream>

#include <httplib.h>

#include "mwand/errors.hpp"
#include "mwand/io.hpp"

namespace mwand {

namespace fs = std::filesystem;

struct MaterialService::Session {
    std::string id;
    std::string bytes;

    mutable std::mutex state_mutex;
    std::condition_variable state_cv;
    SessionStatus status = SessionStatus::ingesting;
    std::string reason;

    // Written once before the status becomes ready.
    std::unique_ptr<MeshArtifacts> art;
    std::unique_ptr<EmbeddingIndex> index;
    std::vector<PartId> face_parts;

    mutable std::shared_mutex assign_mutex;
    std::map<PartId, std::string> assignments;
};

std::string_view to_string(SessionStatus s) {
    switch (s) {
        case SessionStatus::ingesting: return "ingesting";
        case SessionStatus::ready: return "ready";
        case SessionStatus::failed: return "failed";
    }
    return "?";
}

namespace {

std::vector<PartId> part_list(const nlohmann::json& body, const char* key) {
    if (!body.is_object() || !body.contains(key) || !body[key].is_array()) {
        throw RequestError(std::string("request body needs a '") + key + "' array");
    }
    std::vector<PartId> out;
    for (const auto& v : body[key]) {
        if (!v.is_number_integer()) throw RequestError(std::string("'") + key + "' must hold integers");
        out.push_back(v.get<PartId>());
    }
    return out;
}

}  // namespace

std::string encode_geometry(const Mesh& mesh, std::span<const Part> parts) {
    const auto face_parts = face_part_ids(mesh, parts);
    const auto nv = mesh.vertices.size();
    const auto nf = mesh.faces.size();
    nlohmann::json header{{"vertex_count", nv},
                          {"face_count", nf},
                          {"part_count", parts.size()},
                          {"buffers",
                           {{{"name", "vertices"}, {"type", "f32"}, {"offset", 0}, {"count", 3 * nv}},
                            {{"name", "indices"}, {"type", "u32"}, {"offset", 12 * nv}, {"count", 3 * nf}},
                            {{"name", "face_parts"}, {"type", "u32"}, {"offset", 12 * nv + 12 * nf}, {"count", nf}}}}};
    auto text = header.dump();
    while ((4 + text.size()) % 4 != 0) text.push_back(' ');
    std::string out;
    append_u32_le(out, static_cast<std::uint32_t>(text.size()));
    out += text;
    for (const auto& v : mesh.vertices) {
        append_f32_le(out, static_cast<float>(v.x));
        append_f32_le(out, static_cast<float>(v.y));
        append_f32_le(out, static_cast<float>(v.z));
    }
    for (const auto& f : mesh.faces) {
        for (const auto i : f) append_u32_le(out, i);
    }
    for (const auto p : face_parts) append_u32_le(out, static_cast<std::uint32_t>(p));
    return out;
}

DecodedGeometry decode_geometry(std::string_view bytes) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < 4) throw FormatError("geometry buffer shorter than its length prefix");
    const auto header_len = load_u32_le(p);
    if (4 + static_cast<std::size_t>(header_len) > bytes.size()) throw FormatError("geometry header overruns buffer");
    DecodedGeometry g;
    g.header = nlohmann::json::parse(bytes.substr(4, header_len));
    const auto payload = 4 + static_cast<std::size_t>(header_len);
    const auto nv = g.header.at("vertex_count").get<std::size_t>();
    const auto nf = g.header.at("face_count").get<std::size_t>();
    const auto expected = payload + 12 * nv + 12 * nf + 4 * nf;
    if (bytes.size() != expected) {
        throw FormatError("geometry buffer has " + std::to_string(bytes.size()) + " bytes, expected " +
                          std::to_string(expected));
    }
    std::size_t at = payload;
    for (std::size_t i = 0; i < 3 * nv; ++i, at += 4) g.vertices.push_back(load_f32_le(p + at));
    for (std::size_t i = 0; i < 3 * nf; ++i, at += 4) g.indices.push_back(load_u32_le(p + at));
    for (std::size_t i = 0; i < nf; ++i, at += 4) g.face_parts.push_back(load_u32_le(p + at));
    return g;
}

MaterialService::MaterialService(ServiceOptions options) : options_(std::move(options)) {
    options_.pipeline.out_dir = options_.data_dir;
    options_.pipeline.dump_views = false;
    options_.pipeline.training_data = false;
    if (options_.pipeline.space == EmbeddingSpace::z && !options_.pipeline.head_checkpoint) {
        throw ConfigError("--space z requires a head checkpoint");
    }
    if (options_.pipeline.head_checkpoint) head_ = load_head(*options_.pipeline.head_checkpoint);
    fs::create_directories(options_.data_dir);
}

MaterialService::~MaterialService() {
    for (auto& t : workers_) {
        if (t.joinable()) t.join();
    }
}

std::string MaterialService::create_session(std::string bytes) {
    const auto id = sha256_hex(bytes).substr(0, 16);
    std::shared_ptr<Session> s;
    {
        std::lock_guard lock(sessions_mutex_);
        if (sessions_.count(id)) return id;
        s = std::make_shared<Session>();
        s->id = id;
        s->bytes = std::move(bytes);
        sessions_[id] = s;
        workers_.emplace_back([this, s] { ingest(s); });
    }
    return id;
}

void MaterialService::ingest(const std::shared_ptr<Session>& s) {
    std::string stage = kStageLoad;
    try {
        auto mesh = load_obj(s->bytes, s->id);
        auto art = std::make_unique<MeshArtifacts>(
            process_mesh(std::move(mesh), s->id, options_.pipeline, head_ ? &*head_ : nullptr, true, &stage));
        stage = kStageWrite;
        const auto dir = options_.data_dir / s->id;
        write_file(dir / "source.obj", s->bytes);
        write_artifacts(*art, options_.pipeline);
        auto index = std::make_unique<EmbeddingIndex>(art->index(options_.pipeline.space));
        s->face_parts = face_part_ids(art->mesh, art->parts);

        const auto journal = dir / "assignments.jsonl";
        if (fs::exists(journal)) {
            std::ifstream in(journal);
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                const auto j = nlohmann::json::parse(line);
                const auto pid = j.at("part_id").get<PartId>();
                if (index->contains(pid)) s->assignments[pid] = j.at("material").get<std::string>();
            }
        }
        std::lock_guard lock(s->state_mutex);
        s->art = std::move(art);
        s->index = std::move(index);
        s->status = SessionStatus::ready;
    } catch (const ParseError& e) {
        std::lock_guard lock(s->state_mutex);
        s->status = SessionStatus::failed;
        s->reason = std::string("parse error at ") + e.what();
    } catch (const std::exception& e) {
        std::lock_guard lock(s->state_mutex);
        s->status = SessionStatus::failed;
        s->reason = stage + ": " + e.what();
    }
    s->state_cv.notify_all();
}

std::shared_ptr<MaterialService::Session> MaterialService::find(const std::string& id) const {
    std::lock_guard lock(sessions_mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFoundError("unknown mesh " + id);
    return it->second;
}

std::shared_ptr<MaterialService::Session> MaterialService::ready(const std::string& id) const {
    auto s = find(id);
    std::lock_guard lock(s->state_mutex);
    if (s->status != SessionStatus::ready) {
        throw ConflictError("mesh " + id + " is " + std::string(to_string(s->status)));
    }
    return s;
}

SessionStatus MaterialService::wait(const std::string& id) {
    auto s = find(id);
    std::unique_lock lock(s->state_mutex);
    s->state_cv.wait(lock, [&] { return s->status != SessionStatus::ingesting; });
    return s->status;
}

nlohmann::json MaterialService::status(const std::string& id) const {
    auto s = find(id);
    std::lock_guard lock(s->state_mutex);
    nlohmann::json j{{"mesh_id", id}, {"status", to_string(s->status)}};
    if (s->status == SessionStatus::failed) j["reason"] = s->reason;
    if (s->status == SessionStatus::ready) {
        j["parts"] = s->art->parts.size();
        j["exemplars"] = s->art->groups.groups.size();
    }
    return j;
}

nlohmann::json MaterialService::parts(const std::string& id) const {
    const auto s = ready(id);
    auto arr = nlohmann::json::array();
    for (const auto& p : s->art->parts) {
        arr.push_back({{"part_id", p.part_id},
                       {"material_id", p.material_id},
                       {"face_count", p.face_ids.size()},
                       {"vertex_count", p.vertex_count},
                       {"centroid", {p.centroid.x, p.centroid.y, p.centroid.z}},
                       {"max_radial_extent", p.max_radial_extent},
                       {"group", s->art->groups.group_index(p.part_id)},
                       {"exemplar", s->art->groups.exemplar_of(p.part_id)}});
    }
    return arr;
}

std::string MaterialService::geometry(const std::string& id) const {
    const auto s = ready(id);
    return encode_geometry(s->art->mesh, s->art->parts);
}

MaterialService::ViewImage MaterialService::view_image(const std::string& id, PartId part, ViewRole role) const {
    const auto s = ready(id);
    if (!s->index->contains(part)) throw NotFoundError("unknown part " + std::to_string(part));
    const auto ex = s->art->groups.exemplar_of(part);
    const auto it = s->art->view_pngs.find(ex);
    if (it == s->art->view_pngs.end()) throw NotFoundError("no renders for part " + std::to_string(part));
    return {it->second[static_cast<std::size_t>(role)], ex, ex != part};
}

nlohmann::json MaterialService::query(const std::string& id, const nlohmann::json& body) const {
    const auto s = ready(id);
    SelectionRequest req;
    req.query_part_ids = part_list(body, "query_part_ids");
    if (!body.contains("lambda") || !body["lambda"].is_number()) throw RequestError("request body needs a numeric 'lambda'");
    req.lambda = body["lambda"].get<double>();
    for (const auto p : req.query_part_ids) {
        if (!s->index->contains(p)) throw NotFoundError("unknown part " + std::to_string(p));
    }
    return selection_to_json(select_group(*s->index, req), req.lambda);
}

nlohmann::json MaterialService::assign(const std::string& id, const nlohmann::json& body) {
    const auto s = ready(id);
    const auto ids = part_list(body, "part_ids");
    if (!body.contains("material") || !body["material"].is_string()) {
        throw RequestError("request body needs a string 'material'");
    }
    const auto material = body["material"].get<std::string>();
    if (material.find_first_of(" \t\r\n") != std::string::npos) {
        throw RequestError("material names cannot contain whitespace");
    }
    for (const auto p : ids) {
        if (!s->index->contains(p)) throw NotFoundError("unknown part " + std::to_string(p));
    }
    std::unique_lock lock(s->assign_mutex);
    std::string lines;
    const auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count();
    for (const auto p : ids) {
        lines += nlohmann::json{{"part_id", p}, {"material", material}, {"timestamp", now}}.dump() + "\n";
    }
    {
        std::ofstream out(options_.data_dir / id / "assignments.jsonl", std::ios::app | std::ios::binary);
        out << lines;
        if (!out) throw std::runtime_error("failed to append to assignment journal");
    }
    for (const auto p : ids) s->assignments[p] = material;
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [p, m] : s->assignments) j[std::to_string(p)] = m;
    return j;
}

nlohmann::json MaterialService::assignments(const std::string& id) const {
    const auto s = ready(id);
    std::shared_lock lock(s->assign_mutex);
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [p, m] : s->assignments) j[std::to_string(p)] = m;
    return j;
}

std::string MaterialService::export_obj(const std::string& id) const {
    const auto s = ready(id);
    std::shared_lock lock(s->assign_mutex);
    std::vector<std::string> names(s->art->mesh.faces.size());
    for (std::size_t f = 0; f < names.size(); ++f) {
        const auto it = s->assignments.find(s->face_parts[f]);
        if (it != s->assignments.end()) names[f] = it->second;
    }
    return write_obj(s->art->mesh, names);
}

struct HttpServer::Impl {
    MaterialService& service;
    httplib::Server server;
    std::thread thread;

    explicit Impl(MaterialService& svc) : service(svc) { routes(); }

    static void fail(httplib::Response& res, int code, const std::string& msg) {
        res.status = code;
        res.set_content(nlohmann::json{{"error", msg}}.dump(), "application/json");
    }

    template <typename F>
    static httplib::Server::Handler guarded(F f) {
        return [f](const httplib::Request& req, httplib::Response& res) {
            try {
                f(req, res);
            } catch (const NotFoundError& e) {
                fail(res, 404, e.what());
            } catch (const ConflictError& e) {
                fail(res, 409, e.what());
            } catch (const RequestError& e) {
                fail(res, 400, e.what());
            } catch (const nlohmann::json::exception& e) {
                fail(res, 400, e.what());
            } catch (const std::exception& e) {
                fail(res, 500, e.what());
            }
        };
    }

    static void send_json(httplib::Response& res, const nlohmann::json& j) {
        res.set_content(j.dump(), "application/json");
    }

    void routes() {
        const std::string id = "([0-9a-f]+)";
        server.Post("/meshes", guarded([this](const httplib::Request& req, httplib::Response& res) {
                        const auto mesh_id = service.create_session(req.body);
                        res.status = 202;
                        send_json(res, service.status(mesh_id));
                    }));
        server.Get("/meshes/" + id, guarded([this](const httplib::Request& req, httplib::Response& res) {
                       send_json(res, service.status(req.matches[1]));
                   }));
        server.Get("/meshes/" + id + "/parts", guarded([this](const httplib::Request& req, httplib::Response& res) {
                       send_json(res, service.parts(req.matches[1]));
                   }));
        server.Get("/meshes/" + id + "/geometry", guarded([this](const httplib::Request& req, httplib::Response& res) {
                       res.set_content(service.geometry(req.matches[1]), "application/octet-stream");
                   }));
        server.Get("/meshes/" + id + R"(/parts/(\d+)/views/(isolated|context|full)\.png)",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       const auto part = static_cast<PartId>(std::stol(req.matches[2]));
                       const auto img = service.view_image(req.matches[1], part, view_role_from_string(req.matches[3].str()));
                       res.set_header("exemplar", img.exemplar ? "true" : "false");
                       res.set_header("exemplar-part", std::to_string(img.served_part));
                       res.set_content(img.png, "image/png");
                   }));
        server.Post("/meshes/" + id + "/query", guarded([this](const httplib::Request& req, httplib::Response& res) {
                        send_json(res, service.query(req.matches[1], nlohmann::json::parse(req.body)));
                    }));
        server.Post("/meshes/" + id + "/assignments",
                    guarded([this](const httplib::Request& req, httplib::Response& res) {
                        send_json(res, service.assign(req.matches[1], nlohmann::json::parse(req.body)));
                    }));
        server.Get("/meshes/" + id + "/assignments", guarded([this](const httplib::Request& req, httplib::Response& res) {
                       send_json(res, service.assignments(req.matches[1]));
                   }));
        server.Get("/meshes/" + id + R"(/export\.json)",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       send_json(res, service.assignments(req.matches[1]));
                   }));
        server.Get("/meshes/" + id + R"(/export\.obj)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                       res.set_content(service.export_obj(req.matches[1]), "text/plain");
                   }));
    }
};

HttpServer::HttpServer(MaterialService& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
    } else if (!impl_->server.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound < 0) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void HttpServer::listen(const std::string& host, int port) {
    if (!impl_->server.listen(host, port)) throw ConfigError("cannot listen on " + host + ":" + std::to_string(port));
}

void HttpServer::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace mwand
