#include "confsplat/serve.hpp"

#include "confsplat/compress.hpp"

#include <httplib.h>

#include <charconv>
#include <cmath>
#include <regex>

namespace confsplat::serve {

namespace {

std::string error_body(const std::string& message) { return nlohmann::json{{"error", message}}.dump(); }

int parse_int(const std::string& text, const char* name) {
    int value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw HttpError(400, std::string("query parameter '") + name + "' must be an integer");
    }
    return value;
}

}  // namespace

SceneService::SceneService(SplatSet scene, ConfidenceField field, std::vector<Camera> cameras,
                           std::vector<Image> targets, raster::RenderSettings settings)
    : scene_(std::move(scene)), field_(std::move(field)), targets_(std::move(targets)), settings_(settings) {
    scene_.validate();
    field_.validate(scene_.size());
    settings_.validate();
    confidences_ = field_.confidences();
    if (cameras.empty()) {
        if (scene_.mode != SceneMode::TwoD) throw ContractError("SceneService: a 3D scene needs at least one camera");
        views_.push_back({0, std::nullopt});
    }
    for (auto& cam : cameras) {
        cam.validate();
        for (const auto& v : views_) {
            if (v.id == cam.id) throw ContractError("SceneService: duplicate camera id " + std::to_string(cam.id));
        }
        views_.push_back({cam.id, cam});
    }
    if (!targets_.empty() && targets_.size() != views_.size()) {
        throw ContractError("SceneService: targets must be given for every camera or none");
    }
    for (std::size_t i = 0; i < targets_.size(); ++i) {
        const auto* cam = views_[i].camera ? &*views_[i].camera : nullptr;
        const auto [w, h] = raster::output_size(scene_, cam);
        if (targets_[i].width != w || targets_[i].height != h) {
            throw DataError("SceneService: target image for camera " + std::to_string(views_[i].id) +
                            " does not match the camera size");
        }
    }
}

const SceneService::View& SceneService::find_view(int id) const {
    for (const auto& v : views_) {
        if (v.id == id) return v;
    }
    throw HttpError(404, "unknown camera " + std::to_string(id));
}

nlohmann::json SceneService::info() const {
    nlohmann::json cams = nlohmann::json::array();
    for (const auto& v : views_) {
        const auto [w, h] = raster::output_size(scene_, v.camera ? &*v.camera : nullptr);
        cams.push_back({{"id", v.id}, {"width", w}, {"height", h}});
    }
    return {{"n_splats", scene_.size()},
            {"sh_degree", scene_.color_kind == ColorKind::Sh ? scene_.sh_degree : 0},
            {"acs", compress::acs(confidences_)},
            {"active_count", compress::count_active(field_)},
            {"cameras", cams}};
}

std::string SceneService::render_png(int camera_id, double tau, bool heatmap) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw HttpError(400, "tau must lie in [0, 1]");
    const View& view = find_view(camera_id);
    const long q = quantize_tau(tau);
    const CacheKey key{camera_id, q, heatmap};
    {
        std::lock_guard lock(cache_mutex_);
        if (const auto it = index_.find(key); it != index_.end()) {
            lru_.splice(lru_.begin(), lru_, it->second);
            ++hits_;
            return it->second->second;
        }
    }

    const auto pruned = compress::prune(scene_, field_, static_cast<double>(q) / 1000.0);
    const auto conf = pruned.field.confidences();
    const Camera* cam = view.camera ? &*view.camera : nullptr;
    const Image img = heatmap ? raster::render_heatmap(pruned.scene, cam, conf, settings_)
                              : raster::render_scene(pruned.scene, cam, conf, settings_).image;
    const auto bytes = encode_png(img);
    std::string png(bytes.begin(), bytes.end());

    std::lock_guard lock(cache_mutex_);
    if (index_.find(key) == index_.end()) {
        lru_.emplace_front(key, png);
        index_[key] = lru_.begin();
        if (lru_.size() > kCacheCapacity) {
            index_.erase(lru_.back().first);
            lru_.pop_back();
        }
    }
    return png;
}

nlohmann::json SceneService::metrics(double tau) const {
    if (!(tau >= 0.0 && tau <= 1.0)) throw HttpError(400, "tau must lie in [0, 1]");
    const auto pruned = compress::prune(scene_, field_, tau);
    nlohmann::json out{{"tau", tau}, {"kept", pruned.scene.size()}};
    out["acs"] = pruned.scene.empty() ? 0.0 : compress::acs(pruned.field);
    if (!targets_.empty()) {
        std::vector<compress::View> views;
        for (std::size_t i = 0; i < views_.size(); ++i) views.push_back({views_[i].camera, targets_[i]});
        const auto eval = compress::evaluate(pruned.scene, pruned.field, views, settings_);
        const double sqr = compress::sqr(pruned.scene.size(), eval.psnr, compress::sqr_scale(scene_.size()));
        out["psnr"] = std::isfinite(eval.psnr) ? nlohmann::json(eval.psnr) : nlohmann::json("inf");
        out["ssim"] = eval.ssim;
        out["sqr"] = sqr;
    }
    return out;
}

double SceneService::parse_tau(const Query& query) {
    const auto it = query.find("tau");
    if (it == query.end()) return 0.0;
    const std::string& text = it->second;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
        throw HttpError(400, "tau must be a number");
    }
    if (value < 0.0 || value > 1.0) throw HttpError(400, "tau must lie in [0, 1]");
    return value;
}

Response SceneService::handle(const std::string& path, const Query& query) {
    try {
        if (path == "/api/info") return {200, "application/json", info().dump()};
        if (path == "/api/metrics") return {200, "application/json", metrics(parse_tau(query)).dump()};
        if (path == "/api/render") {
            const auto cam = query.find("cam");
            if (cam == query.end()) throw HttpError(400, "missing query parameter 'cam'");
            const int id = parse_int(cam->second, "cam");
            const double tau = parse_tau(query);
            const auto hm = query.find("heatmap");
            const bool heatmap = hm != query.end() && (hm->second == "1" || hm->second == "true");
            return {200, "image/png", render_png(id, tau, heatmap)};
        }
        throw HttpError(404, "no route for " + path);
    } catch (const HttpError& e) {
        return {e.status(), "application/json", error_body(e.what())};
    }
}

std::size_t SceneService::cache_size() const {
    std::lock_guard lock(cache_mutex_);
    return lru_.size();
}

std::uint64_t SceneService::cache_hits() const {
    std::lock_guard lock(cache_mutex_);
    return hits_;
}

bool is_localhost_origin(const std::string& origin) {
    static const std::regex pattern(R"(^https?://(localhost|127\.0\.0\.1|\[::1\])(:[0-9]{1,5})?$)");
    return std::regex_match(origin, pattern);
}

struct HttpServer::Impl {
    SceneService& service;
    httplib::Server server;
    int port = -1;

    explicit Impl(SceneService& s) : service(s) {
        server.set_pre_routing_handler([](const httplib::Request& req, httplib::Response& res) {
            const auto origin = req.get_header_value("Origin");
            if (!origin.empty() && is_localhost_origin(origin)) {
                res.set_header("Access-Control-Allow-Origin", origin);
                res.set_header("Vary", "Origin");
                res.set_header("Access-Control-Allow-Methods", "GET, OPTIONS");
                res.set_header("Access-Control-Allow-Headers", "Content-Type");
            }
            return httplib::Server::HandlerResponse::Unhandled;
        });
        server.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
        server.Get(".*", [this](const httplib::Request& req, httplib::Response& res) {
            Query query;
            for (const auto& [k, v] : req.params) query.emplace(k, v);
            Response out;
            try {
                out = service.handle(req.path, query);
            } catch (const std::exception& e) {
                out = {500, "application/json", error_body(e.what())};
            }
            res.status = out.status;
            res.set_content(out.body, out.content_type);
        });
    }
};

HttpServer::HttpServer(SceneService& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) {
        impl_->port = impl_->server.bind_to_any_port(host);
    } else {
        impl_->port = impl_->server.bind_to_port(host, port) ? port : -1;
    }
    if (impl_->port < 0) throw DataError("serve: cannot bind " + host + ":" + std::to_string(port));
    return impl_->port;
}

void HttpServer::run() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace confsplat::serve
