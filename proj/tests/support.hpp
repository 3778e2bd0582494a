#pragma once

#include "confsplat/betaconf.hpp"
#include "confsplat/core.hpp"
#include "confsplat/image.hpp"
#include "confsplat/raster.hpp"

#include <cmath>
#include <cstdint>
#include <algorithm>
#include <functional>
#include <span>
#include <random>
#include <string>

namespace testsupport {

using namespace confsplat;

inline std::string data_path(const std::string& name) { return std::string(CONFSPLAT_TEST_DATA) + "/" + name; }

/// Relative/absolute closeness used by every finite-difference check.
inline bool grad_close(double analytic, double numeric, double rel = 1e-4, double abs = 1e-6) {
    return std::abs(analytic - numeric) <= abs + rel * std::abs(numeric);
}

/// Central difference of f at x along one coordinate.
inline double central_diff(const std::function<double(double)>& f, double x, double h = 1e-6) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline Image random_image(int w, int h, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Image img(w, h);
    for (double& v : img.data) v = u(rng);
    return img;
}

inline double dot(const Image& a, const Image& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

/// Random 2D scene on a w x h canvas; splats stay inside the canvas.
inline SplatSet random_scene_2d(std::size_t n, int w, int h, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SplatSet scene;
    scene.mode = SceneMode::TwoD;
    scene.color_kind = ColorKind::Rgb;
    scene.canvas_width = w;
    scene.canvas_height = h;
    for (std::size_t i = 0; i < n; ++i) {
        Splat s;
        s.position = {2.0 + (w - 4.0) * u(rng), 2.0 + (h - 4.0) * u(rng), 0.0};
        s.log_scale = {std::log(1.0 + 2.0 * u(rng)), std::log(1.0 + 2.0 * u(rng)), 0.0};
        s.set_angle_2d(6.0 * u(rng) - 3.0);
        s.color = {0.1 + 0.8 * u(rng), 0.1 + 0.8 * u(rng), 0.1 + 0.8 * u(rng)};
        s.opacity_logit = -1.0 + 2.0 * u(rng);
        scene.splats.push_back(s);
    }
    return scene;
}

/// Camera at the origin looking down +z with a w x h image.
inline Camera forward_camera(int w, int h, int id = 0) {
    Camera cam;
    cam.id = id;
    cam.width = w;
    cam.height = h;
    cam.fx = cam.fy = 1.2 * w;
    cam.cx = 0.5 * w;
    cam.cy = 0.5 * h;
    return cam;
}

/// Random 3D SH scene in front of forward_camera.
inline SplatSet random_scene_3d(std::size_t n, int degree, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SplatSet scene;
    scene.mode = SceneMode::ThreeD;
    scene.color_kind = ColorKind::Sh;
    scene.sh_degree = degree;
    const std::size_t coeffs = sh_coeff_count(degree);
    for (std::size_t i = 0; i < n; ++i) {
        Splat s;
        const double z = 3.0 + 2.0 * u(rng);
        s.position = {(u(rng) - 0.5) * 0.6 * z, (u(rng) - 0.5) * 0.6 * z, z};
        s.log_scale = {std::log(0.08 + 0.15 * u(rng)), std::log(0.08 + 0.15 * u(rng)), std::log(0.08 + 0.15 * u(rng))};
        Eigen::Vector4d q(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5);
        s.rotation = q + Eigen::Vector4d(1.0, 0.0, 0.0, 0.0);
        s.color.assign(3 * coeffs, 0.0);
        for (int c = 0; c < 3; ++c) s.color[c] = (0.2 + 0.5 * u(rng) - 0.5) / raster::kShC0 + 0.4;
        for (std::size_t k = 3; k < s.color.size(); ++k) s.color[k] = 0.1 * (u(rng) - 0.5);
        s.opacity_logit = -1.0 + 2.0 * u(rng);
        scene.splats.push_back(s);
    }
    return scene;
}

inline ConfidenceField random_field(std::size_t n, std::mt19937_64& rng, double spread = 2.0) {
    std::uniform_real_distribution<double> u(-spread, spread);
    ConfidenceField f;
    for (std::size_t i = 0; i < n; ++i) {
        f.raw_alpha.push_back(u(rng));
        f.raw_beta.push_back(u(rng));
    }
    return f;
}

}  // namespace testsupport

namespace testsupport {

/// Brute-force compositing with o = sigmoid(logit) and no confidence factor:
/// every splat is tested at every pixel, no tiles, no records.
inline Image reference_render(const raster::ProjectedList& projected, std::span<const double> logits, int w, int h,
                              const raster::RenderSettings& st) {
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < projected.size(); ++i) {
        if (projected[i] && projected[i]->cov.determinant() >= 1e-12) order.push_back(i);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return projected[a]->depth < projected[b]->depth; });
    Image img(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Eigen::Vector2d pix(x + 0.5, y + 0.5);
            double t = 1.0;
            Rgb col{0.0, 0.0, 0.0};
            for (std::size_t i : order) {
                const auto& p = *projected[i];
                const Eigen::Matrix2d conic = p.cov.inverse();
                const Eigen::Vector2d d = pix - p.mean;
                const double power = -0.5 * d.dot(conic * d);
                double a = betaconf::sigmoid(logits[i]) * std::exp(power);
                if (a > st.alpha_max) a = st.alpha_max;
                if (a < st.alpha_min) continue;
                const double wgt = a * t;
                for (int c = 0; c < 3; ++c) col[c] += wgt * p.view_color[c];
                t *= 1.0 - a;
                if (t < st.transmittance_floor) break;
            }
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = col[c] + t * st.background[c];
        }
    }
    return img;
}

inline std::vector<double> logits_of(const SplatSet& scene) {
    std::vector<double> out;
    for (const auto& s : scene.splats) out.push_back(s.opacity_logit);
    return out;
}

}  // namespace testsupport
