#pragma once

#include "confsplat/core.hpp"
#include "confsplat/image.hpp"
#include "confsplat/raster.hpp"

#include <json.hpp>

#include <cstdint>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace confsplat::serve {

/// Raised by handlers; carries the HTTP status to report.
class HttpError : public std::runtime_error {
public:
    HttpError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
    int status() const { return status_; }

private:
    int status_;
};

struct Response {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

using Query = std::map<std::string, std::string>;

/// Read-only view over an immutable scene snapshot.
///
/// Thread-safe: the render cache is the only mutable member and is guarded by a mutex.
class SceneService {
public:
    static constexpr std::size_t kCacheCapacity = 64;

    /// `targets`, when non-empty, must hold one image per camera. A 2D scene with no
    /// cameras exposes a single view with id 0 covering the canvas.
    SceneService(SplatSet scene, ConfidenceField field, std::vector<Camera> cameras,
                 std::vector<Image> targets = {}, raster::RenderSettings settings = {});

    nlohmann::json info() const;
    /// PNG bytes for the scene pruned at tau (quantised to 1e-3).
    std::string render_png(int camera_id, double tau, bool heatmap);
    nlohmann::json metrics(double tau) const;

    /// Routes GET requests; errors become JSON bodies with the matching status.
    Response handle(const std::string& path, const Query& query);

    std::size_t cache_size() const;
    std::uint64_t cache_hits() const;

    static double parse_tau(const Query& query);
    static long quantize_tau(double tau) { return static_cast<long>(tau * 1000.0 + 0.5); }

private:
    struct View {
        int id = 0;
        std::optional<Camera> camera;
    };
    using CacheKey = std::tuple<int, long, bool>;

    const View& find_view(int id) const;

    SplatSet scene_;
    ConfidenceField field_;
    std::vector<double> confidences_;
    std::vector<View> views_;
    std::vector<Image> targets_;
    raster::RenderSettings settings_;

    mutable std::mutex cache_mutex_;
    std::list<std::pair<CacheKey, std::string>> lru_;
    std::map<CacheKey, std::list<std::pair<CacheKey, std::string>>::iterator> index_;
    std::uint64_t hits_ = 0;
};

/// True for http(s)://localhost[:port] and http(s)://127.0.0.1[:port].
bool is_localhost_origin(const std::string& origin);

/// HTTP front end. `bind` picks a free port when given 0.
class HttpServer {
public:
    explicit HttpServer(SceneService& service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    int bind(const std::string& host, int port);
    /// Blocks until stop() is called.
    void run();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace confsplat::serve
