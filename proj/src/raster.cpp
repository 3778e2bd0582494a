#include "confsplat/raster.hpp"

#include "confsplat/betaconf.hpp"
#include "confsplat/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace confsplat::raster {

namespace {

constexpr int kTileSize = 16;
constexpr double kSingularDeterminant = 1e-12;

constexpr double kShC1 = 0.4886025119029199;
constexpr std::array<double, 5> kShC2{1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                                      -1.0925484305920792, 0.5462742152960396};
constexpr std::array<double, 7> kShC3{-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                                      0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                                      -0.5900435899266435};

Eigen::Matrix3d quaternion_to_matrix(const Eigen::Vector4d& q) {
    const Eigen::Quaterniond quat(q[0], q[1], q[2], q[3]);
    return quat.normalized().toRotationMatrix();
}

Rgb color_from_splat(const Splat& splat, const SplatSet& scene, const Eigen::Vector3d& dir,
                     std::array<bool, 3>& clamped) {
    clamped = {false, false, false};
    if (scene.color_kind == ColorKind::Rgb) {
        return {splat.color[0], splat.color[1], splat.color[2]};
    }
    const auto basis = sh_basis(dir, scene.sh_degree);
    Rgb out{0.5, 0.5, 0.5};
    for (std::size_t k = 0; k < basis.size(); ++k) {
        for (int c = 0; c < 3; ++c) out[c] += basis[k] * splat.color[3 * k + c];
    }
    for (int c = 0; c < 3; ++c) {
        if (out[c] < 0.0) {
            out[c] = 0.0;
            clamped[c] = true;
        }
    }
    return out;
}

// Radius (pixels) beyond which a splat's alpha is certainly below alpha_min.
double influence_radius(const Projected2D& p, double effective_opacity, double alpha_min) {
    if (effective_opacity < alpha_min) return -1.0;
    const double lambda_max = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(p.cov, Eigen::EigenvaluesOnly).eigenvalues()[1];
    return std::sqrt(2.0 * std::log(effective_opacity / alpha_min) * lambda_max);
}

struct ScreenSplat {
    std::uint32_t index = 0;
    Eigen::Vector2d mean;
    Eigen::Matrix2d conic;
    Rgb color;
    double opacity = 0.0;
};

}  // namespace

void RenderSettings::validate() const {
    if (!(alpha_min > 0.0 && alpha_min < alpha_max && alpha_max <= 1.0)) {
        throw ContractError("RenderSettings: need 0 < alpha_min < alpha_max <= 1");
    }
    if (!(transmittance_floor > 0.0 && transmittance_floor < 0.1)) {
        throw ContractError("RenderSettings: transmittance_floor must lie in (0, 0.1)");
    }
    if (!(cov_dilation >= 0.0)) {
        throw ContractError("RenderSettings: cov_dilation must be nonnegative");
    }
}

std::vector<double> sh_basis(const Eigen::Vector3d& dir, int degree) {
    if (degree < 0 || degree > 3) throw ContractError("sh_basis: degree must be in [0, 3]");
    std::vector<double> y;
    y.reserve(static_cast<std::size_t>(sh_coeff_count(degree)));
    y.push_back(kShC0);
    if (degree < 1) return y;
    const double x = dir.x();
    const double yy_ = dir.y();
    const double z = dir.z();
    y.push_back(-kShC1 * yy_);
    y.push_back(kShC1 * z);
    y.push_back(-kShC1 * x);
    if (degree < 2) return y;
    const double xx = x * x, yy = yy_ * yy_, zz = z * z;
    const double xy = x * yy_, yz = yy_ * z, xz = x * z;
    y.push_back(kShC2[0] * xy);
    y.push_back(kShC2[1] * yz);
    y.push_back(kShC2[2] * (2.0 * zz - xx - yy));
    y.push_back(kShC2[3] * xz);
    y.push_back(kShC2[4] * (xx - yy));
    if (degree < 3) return y;
    y.push_back(kShC3[0] * yy_ * (3.0 * xx - yy));
    y.push_back(kShC3[1] * xy * z);
    y.push_back(kShC3[2] * yy_ * (4.0 * zz - xx - yy));
    y.push_back(kShC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy));
    y.push_back(kShC3[4] * x * (4.0 * zz - xx - yy));
    y.push_back(kShC3[5] * z * (xx - yy));
    y.push_back(kShC3[6] * x * (xx - 3.0 * yy));
    return y;
}

Rgb evaluate_sh(std::span<const double> coeffs, const Eigen::Vector3d& view_dir, int degree) {
    if (degree < 0 || degree > 3) throw ContractError("evaluate_sh: degree must be in [0, 3]");
    const std::size_t expected = static_cast<std::size_t>(3 * sh_coeff_count(degree));
    if (coeffs.size() != expected) {
        throw ContractError("evaluate_sh: expected " + std::to_string(expected) + " coefficients, got " +
                            std::to_string(coeffs.size()));
    }
    const auto basis = sh_basis(view_dir, degree);
    Rgb out{0.5, 0.5, 0.5};
    for (std::size_t k = 0; k < basis.size(); ++k) {
        for (int c = 0; c < 3; ++c) out[c] += basis[k] * coeffs[3 * k + c];
    }
    for (double& v : out) v = std::max(v, 0.0);
    return out;
}

std::optional<Projected2D> project_splat(const Splat& splat, const SplatSet& scene, const Camera& camera,
                                         const RenderSettings& settings) {
    const Eigen::Vector3d t = camera.rotation * splat.position + camera.translation;
    if (t.z() <= settings.near_plane) return std::nullopt;

    const double inv_z = 1.0 / t.z();
    Projected2D out;
    out.mean = {camera.fx * t.x() * inv_z + camera.cx, camera.fy * t.y() * inv_z + camera.cy};

    Eigen::Matrix<double, 2, 3> jac;
    jac << camera.fx * inv_z, 0.0, -camera.fx * t.x() * inv_z * inv_z,  //
        0.0, camera.fy * inv_z, -camera.fy * t.y() * inv_z * inv_z;
    const Eigen::Matrix3d m = quaternion_to_matrix(splat.rotation) * splat.log_scale.array().exp().matrix().asDiagonal();
    const Eigen::Matrix3d sigma = m * m.transpose();
    const Eigen::Matrix<double, 2, 3> jw = jac * camera.rotation;
    out.cov = jw * sigma * jw.transpose();
    out.cov(0, 1) = out.cov(1, 0) = 0.5 * (out.cov(0, 1) + out.cov(1, 0));
    out.cov.diagonal().array() += settings.cov_dilation;
    out.depth = t.z();

    const double lambda_max = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(out.cov, Eigen::EigenvaluesOnly).eigenvalues()[1];
    const double margin = 3.0 * std::sqrt(std::max(lambda_max, 0.0));
    if (out.mean.x() < -margin || out.mean.x() > camera.width + margin || out.mean.y() < -margin ||
        out.mean.y() > camera.height + margin) {
        return std::nullopt;
    }

    out.view_dir = (splat.position - camera.center()).normalized();
    out.view_color = color_from_splat(splat, scene, out.view_dir, out.color_clamped);
    return out;
}

Projected2D project_splat_2d(const Splat& splat, std::size_t index, const SplatSet& scene,
                             const RenderSettings& settings) {
    Projected2D out;
    out.mean = splat.position.head<2>();
    const double angle = splat.angle_2d();
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const double v1 = std::exp(2.0 * splat.log_scale.x());
    const double v2 = std::exp(2.0 * splat.log_scale.y());
    out.cov << c * c * v1 + s * s * v2, c * s * (v1 - v2),  //
        c * s * (v1 - v2), s * s * v1 + c * c * v2;
    out.cov.diagonal().array() += settings.cov_dilation;
    out.depth = static_cast<double>(index);
    out.view_dir = Eigen::Vector3d::UnitZ();
    out.view_color = color_from_splat(splat, scene, out.view_dir, out.color_clamped);
    return out;
}

ProjectedList project_scene(const SplatSet& scene, const Camera* camera, const RenderSettings& settings) {
    ProjectedList out(scene.size());
    if (scene.mode == SceneMode::TwoD) {
        for (std::size_t i = 0; i < scene.size(); ++i) out[i] = project_splat_2d(scene.splats[i], i, scene, settings);
        return out;
    }
    if (camera == nullptr) throw ContractError("project_scene: 3D scenes need a camera");
    for (std::size_t i = 0; i < scene.size(); ++i) out[i] = project_splat(scene.splats[i], scene, *camera, settings);
    return out;
}

RenderResult render_forward(const ProjectedList& projected, std::span<const double> confidences,
                            std::span<const double> opacity_logits, int width, int height,
                            const RenderSettings& settings) {
    settings.validate();
    const std::size_t n = projected.size();
    if (confidences.size() != n || opacity_logits.size() != n) {
        throw ContractError("render_forward: projected, confidence and opacity lists must have equal length");
    }
    if (width < 1 || height < 1) throw ContractError("render_forward: image size must be positive");

    RenderResult result;
    RenderAux& aux = result.aux;
    aux.width = width;
    aux.height = height;
    aux.splat_count = n;
    aux.background = settings.background;
    aux.projected = projected;
    aux.confidences.assign(confidences.begin(), confidences.end());
    aux.opacity_sigmoid.resize(n);
    aux.effective_opacity.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        aux.opacity_sigmoid[i] = betaconf::sigmoid(opacity_logits[i]);
        aux.effective_opacity[i] = aux.opacity_sigmoid[i] * confidences[i];
    }

    // Depth order: stable, ties broken by ascending index.
    for (std::size_t i = 0; i < n; ++i) {
        if (!projected[i]) continue;
        if (projected[i]->cov.determinant() < kSingularDeterminant) {
            ++aux.skipped_singular;
            continue;
        }
        aux.depth_order.push_back(static_cast<std::uint32_t>(i));
    }
    std::stable_sort(aux.depth_order.begin(), aux.depth_order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return projected[a]->depth < projected[b]->depth; });

    // Coarse tile binning; lists stay in depth order because splats are visited in order.
    const int tiles_x = (width + kTileSize - 1) / kTileSize;
    const int tiles_y = (height + kTileSize - 1) / kTileSize;
    std::vector<ScreenSplat> screen;
    screen.reserve(aux.depth_order.size());
    std::vector<std::vector<std::uint32_t>> tiles(static_cast<std::size_t>(tiles_x * tiles_y));
    for (std::uint32_t idx : aux.depth_order) {
        const Projected2D& p = *projected[idx];
        const double opacity = aux.effective_opacity[idx];
        const double radius = influence_radius(p, opacity, settings.alpha_min);
        if (radius < 0.0) continue;
        // Pixel centres sit at integer + 0.5.
        const int x0 = std::max(0, static_cast<int>(std::floor(p.mean.x() - radius - 0.5)));
        const int x1 = std::min(width - 1, static_cast<int>(std::ceil(p.mean.x() + radius - 0.5)));
        const int y0 = std::max(0, static_cast<int>(std::floor(p.mean.y() - radius - 0.5)));
        const int y1 = std::min(height - 1, static_cast<int>(std::ceil(p.mean.y() + radius - 0.5)));
        if (x0 > x1 || y0 > y1) continue;
        const auto slot = static_cast<std::uint32_t>(screen.size());
        screen.push_back({idx, p.mean, p.cov.inverse(), p.view_color, opacity});
        for (int ty = y0 / kTileSize; ty <= y1 / kTileSize; ++ty) {
            for (int tx = x0 / kTileSize; tx <= x1 / kTileSize; ++tx) {
                tiles[static_cast<std::size_t>(ty * tiles_x + tx)].push_back(slot);
            }
        }
    }

    result.image = Image(width, height);
    aux.final_transmittance.assign(static_cast<std::size_t>(width) * height, 1.0);
    std::vector<std::vector<Contribution>> row_records(static_cast<std::size_t>(height));
    std::vector<std::vector<std::uint32_t>> row_counts(static_cast<std::size_t>(height));

    parallel_for(static_cast<std::size_t>(height), [&](std::size_t row) {
        const int y = static_cast<int>(row);
        auto& records = row_records[row];
        auto& counts = row_counts[row];
        counts.assign(static_cast<std::size_t>(width), 0);
        const auto& bg = settings.background;
        for (int x = 0; x < width; ++x) {
            const auto& list = tiles[static_cast<std::size_t>((y / kTileSize) * tiles_x + x / kTileSize)];
            const Eigen::Vector2d pix(x + 0.5, y + 0.5);
            double transmittance = 1.0;
            Rgb color{0.0, 0.0, 0.0};
            std::uint32_t count = 0;
            for (std::uint32_t slot : list) {
                const ScreenSplat& s = screen[slot];
                const Eigen::Vector2d d = pix - s.mean;
                const double power = -0.5 * d.dot(s.conic * d);
                const double raw_alpha = s.opacity * std::exp(power);
                const bool clamped = raw_alpha > settings.alpha_max;
                const double alpha = clamped ? settings.alpha_max : raw_alpha;
                if (alpha < settings.alpha_min) continue;
                const double weight = alpha * transmittance;
                for (int c = 0; c < 3; ++c) color[c] += weight * s.color[c];
                records.push_back({s.index, clamped, alpha, transmittance, weight});
                ++count;
                transmittance *= 1.0 - alpha;
                if (transmittance < settings.transmittance_floor) break;
            }
            for (int c = 0; c < 3; ++c) result.image.at(x, y, c) = color[c] + transmittance * bg[c];
            aux.final_transmittance[static_cast<std::size_t>(y) * width + x] = transmittance;
            counts[static_cast<std::size_t>(x)] = count;
        }
    });

    aux.pixel_offsets.resize(static_cast<std::size_t>(width) * height + 1);
    std::size_t total = 0;
    for (const auto& r : row_records) total += r.size();
    aux.records.reserve(total);
    std::size_t pixel = 0;
    aux.pixel_offsets[0] = 0;
    for (int y = 0; y < height; ++y) {
        aux.records.insert(aux.records.end(), row_records[static_cast<std::size_t>(y)].begin(),
                           row_records[static_cast<std::size_t>(y)].end());
        for (std::uint32_t c : row_counts[static_cast<std::size_t>(y)]) {
            aux.pixel_offsets[pixel + 1] = aux.pixel_offsets[pixel] + c;
            ++pixel;
        }
    }
    return result;
}

GradientSet render_backward(const RenderAux& aux, const Image& pixel_grads) {
    if (pixel_grads.width != aux.width || pixel_grads.height != aux.height) {
        throw ContractError("render_backward: gradient image does not match the forward render");
    }
    if (aux.pixel_offsets.size() != static_cast<std::size_t>(aux.width) * aux.height + 1 ||
        aux.projected.size() != aux.splat_count || aux.confidences.size() != aux.splat_count) {
        throw ContractError("render_backward: auxiliary records are inconsistent");
    }
    const std::size_t n = aux.splat_count;

    // Fixed 16-row blocks with their own accumulators, merged in block order,
    // so the result does not depend on the worker count.
    struct Accum {
        std::vector<double> d_oeff;
        std::vector<Rgb> d_color;
        std::vector<Eigen::Vector2d> d_mean;
        std::vector<Eigen::Vector3d> d_conic;  // (xx, xy + yx, yy)
    };
    const std::size_t blocks = (static_cast<std::size_t>(aux.height) + kTileSize - 1) / kTileSize;
    std::vector<Accum> accum(blocks);

    std::vector<Eigen::Matrix2d> conics(n, Eigen::Matrix2d::Zero());
    for (std::uint32_t idx : aux.depth_order) conics[idx] = aux.projected[idx]->cov.inverse();

    parallel_for(blocks, [&](std::size_t b) {
        Accum& acc = accum[b];
        acc.d_oeff.assign(n, 0.0);
        acc.d_color.assign(n, Rgb{0.0, 0.0, 0.0});
        acc.d_mean.assign(n, Eigen::Vector2d::Zero());
        acc.d_conic.assign(n, Eigen::Vector3d::Zero());
        const int y_end = std::min(aux.height, static_cast<int>((b + 1) * kTileSize));
        for (int y = static_cast<int>(b * kTileSize); y < y_end; ++y) {
            for (int x = 0; x < aux.width; ++x) {
                const std::size_t pixel = static_cast<std::size_t>(y) * aux.width + x;
                const Rgb dc{pixel_grads.at(x, y, 0), pixel_grads.at(x, y, 1), pixel_grads.at(x, y, 2)};
                if (dc[0] == 0.0 && dc[1] == 0.0 && dc[2] == 0.0) continue;
                const auto recs = aux.pixel_records(pixel);
                const Eigen::Vector2d pix(x + 0.5, y + 0.5);
                // Normalised colour of everything behind the current splat.
                Rgb behind = aux.background;
                for (auto it = recs.rbegin(); it != recs.rend(); ++it) {
                    const Contribution& r = *it;
                    const Projected2D& p = *aux.projected[r.splat];
                    const Rgb& col = p.view_color;
                    double d_alpha = 0.0;
                    for (int c = 0; c < 3; ++c) {
                        acc.d_color[r.splat][c] += r.weight * dc[c];
                        d_alpha += (col[c] - behind[c]) * dc[c];
                    }
                    d_alpha *= r.transmittance;
                    for (int c = 0; c < 3; ++c) behind[c] = r.alpha * col[c] + (1.0 - r.alpha) * behind[c];
                    if (r.clamped) continue;

                    const Eigen::Vector2d d = pix - p.mean;
                    const Eigen::Matrix2d& q = conics[r.splat];
                    const double falloff = std::exp(-0.5 * d.dot(q * d));
                    acc.d_oeff[r.splat] += d_alpha * falloff;
                    // d alpha / d power = alpha for the unclamped branch.
                    const double d_power = d_alpha * r.alpha;
                    acc.d_mean[r.splat] += d_power * (q * d);
                    acc.d_conic[r.splat] += -0.5 * d_power * Eigen::Vector3d(d.x() * d.x(), 2.0 * d.x() * d.y(), d.y() * d.y());
                }
            }
        }
    });

    GradientSet out;
    out.d_opacity_logit.assign(n, 0.0);
    out.d_confidence.assign(n, 0.0);
    out.d_view_color.assign(n, Rgb{0.0, 0.0, 0.0});
    out.d_mean.assign(n, Eigen::Vector2d::Zero());
    out.d_cov.assign(n, Eigen::Vector3d::Zero());
    std::vector<double> d_oeff(n, 0.0);
    std::vector<Eigen::Vector3d> d_conic(n, Eigen::Vector3d::Zero());
    for (const Accum& acc : accum) {
        for (std::size_t i = 0; i < n; ++i) {
            d_oeff[i] += acc.d_oeff[i];
            for (int c = 0; c < 3; ++c) out.d_view_color[i][c] += acc.d_color[i][c];
            out.d_mean[i] += acc.d_mean[i];
            d_conic[i] += acc.d_conic[i];
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double sig = aux.opacity_sigmoid[i];
        out.d_confidence[i] = d_oeff[i] * sig;
        out.d_opacity_logit[i] = d_oeff[i] * aux.confidences[i] * sig * (1.0 - sig);
        if (!aux.projected[i]) continue;
        // Conic Q = cov^-1: dL/dcov = -Q (dL/dQ) Q, with the off-diagonal split evenly.
        Eigen::Matrix2d g;
        g << d_conic[i].x(), 0.5 * d_conic[i].y(),  //
            0.5 * d_conic[i].y(), d_conic[i].z();
        const Eigen::Matrix2d& q = conics[i];
        const Eigen::Matrix2d d_cov = -q * g * q;
        out.d_cov[i] = {d_cov(0, 0), d_cov(0, 1) + d_cov(1, 0), d_cov(1, 1)};
    }
    return out;
}

SceneGradients chain_to_scene(const SplatSet& scene, const RenderAux& aux, const GradientSet& grads) {
    const std::size_t n = scene.size();
    if (aux.splat_count != n || grads.d_confidence.size() != n) {
        throw ContractError("chain_to_scene: gradient set does not match the scene");
    }
    SceneGradients out;
    out.d_opacity_logit = grads.d_opacity_logit;
    out.d_confidence = grads.d_confidence;
    const std::size_t stride = scene.color_size();
    out.d_color.assign(n * stride, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (!aux.projected[i]) continue;
        const Projected2D& p = *aux.projected[i];
        const Rgb& dv = grads.d_view_color[i];
        double* dst = out.d_color.data() + i * stride;
        if (scene.color_kind == ColorKind::Rgb) {
            for (int c = 0; c < 3; ++c) dst[c] = dv[c];
            continue;
        }
        const auto basis = sh_basis(p.view_dir, scene.sh_degree);
        for (std::size_t k = 0; k < basis.size(); ++k) {
            for (int c = 0; c < 3; ++c) {
                if (!p.color_clamped[c]) dst[3 * k + c] = basis[k] * dv[c];
            }
        }
    }
    if (scene.mode != SceneMode::TwoD) return out;

    out.d_position.assign(n, Eigen::Vector2d::Zero());
    out.d_log_scale.assign(n, Eigen::Vector2d::Zero());
    out.d_angle.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const Splat& s = scene.splats[i];
        out.d_position[i] = grads.d_mean[i];
        const double angle = s.angle_2d();
        const double c = std::cos(angle);
        const double sn = std::sin(angle);
        const double v1 = std::exp(2.0 * s.log_scale.x());
        const double v2 = std::exp(2.0 * s.log_scale.y());
        const Eigen::Vector3d& g = grads.d_cov[i];
        // cov = (c^2 v1 + s^2 v2, cs (v1 - v2), s^2 v1 + c^2 v2)
        const Eigen::Vector3d d_l1(2.0 * c * c * v1, 2.0 * c * sn * v1, 2.0 * sn * sn * v1);
        const Eigen::Vector3d d_l2(2.0 * sn * sn * v2, -2.0 * c * sn * v2, 2.0 * c * c * v2);
        const Eigen::Vector3d d_th(2.0 * c * sn * (v2 - v1), (c * c - sn * sn) * (v1 - v2), 2.0 * c * sn * (v1 - v2));
        out.d_log_scale[i] = {g.dot(d_l1), g.dot(d_l2)};
        out.d_angle[i] = g.dot(d_th);
    }
    return out;
}

std::vector<double> accumulate_saliency(const RenderAux& aux, const Image& pixel_recon_grads) {
    if (pixel_recon_grads.width != aux.width || pixel_recon_grads.height != aux.height) {
        throw ContractError("accumulate_saliency: gradient image does not match the forward render");
    }
    std::vector<double> saliency(aux.splat_count, 0.0);
    const std::size_t pixels = static_cast<std::size_t>(aux.width) * aux.height;
    for (std::size_t p = 0; p < pixels; ++p) {
        const double mag = std::abs(pixel_recon_grads.data[3 * p]) + std::abs(pixel_recon_grads.data[3 * p + 1]) +
                           std::abs(pixel_recon_grads.data[3 * p + 2]);
        if (mag == 0.0) continue;
        for (const Contribution& r : aux.pixel_records(p)) saliency[r.splat] += r.weight * mag;
    }
    return saliency;
}

SaliencyTracker::SaliencyTracker(std::size_t n, double decay) : ema_(n, 0.0), decay_(decay) {
    if (!(decay >= 0.0 && decay < 1.0)) throw ContractError("SaliencyTracker: decay must lie in [0, 1)");
}

void SaliencyTracker::update(std::span<const double> saliency) {
    if (saliency.size() != ema_.size()) throw ContractError("SaliencyTracker: length mismatch");
    for (std::size_t i = 0; i < ema_.size(); ++i) ema_[i] = decay_ * ema_[i] + (1.0 - decay_) * saliency[i];
}

Rgb confidence_colormap(double c) {
    // Viridis sampled at 17 evenly spaced stops.
    static constexpr std::array<Rgb, 17> kStops{{
        {0.267004, 0.004874, 0.329415}, {0.282327, 0.094955, 0.417331}, {0.278826, 0.175490, 0.483397},
        {0.258965, 0.251537, 0.524736}, {0.229739, 0.322361, 0.545706}, {0.199430, 0.387607, 0.554642},
        {0.172719, 0.448791, 0.557885}, {0.149039, 0.508051, 0.557250}, {0.127568, 0.566949, 0.550556},
        {0.120638, 0.625828, 0.533488}, {0.157851, 0.683765, 0.501686}, {0.246070, 0.738910, 0.452024},
        {0.369214, 0.788888, 0.382914}, {0.515992, 0.831158, 0.294279}, {0.678489, 0.863742, 0.189503},
        {0.845561, 0.887322, 0.099702}, {0.993248, 0.906157, 0.143936},
    }};
    const double t = std::clamp(c, 0.0, 1.0) * (kStops.size() - 1);
    const std::size_t lo = std::min(static_cast<std::size_t>(t), kStops.size() - 2);
    const double f = t - static_cast<double>(lo);
    Rgb out;
    for (int k = 0; k < 3; ++k) out[k] = (1.0 - f) * kStops[lo][k] + f * kStops[lo + 1][k];
    return out;
}

std::pair<int, int> output_size(const SplatSet& scene, const Camera* camera) {
    if (scene.mode == SceneMode::TwoD) return {scene.canvas_width, scene.canvas_height};
    if (camera == nullptr) throw ContractError("output_size: 3D scenes need a camera");
    return {camera->width, camera->height};
}

RenderResult render_scene(const SplatSet& scene, const Camera* camera, std::span<const double> confidences,
                          const RenderSettings& settings) {
    const auto [w, h] = output_size(scene, camera);
    std::vector<double> logits(scene.size());
    std::transform(scene.splats.begin(), scene.splats.end(), logits.begin(),
                   [](const Splat& s) { return s.opacity_logit; });
    return render_forward(project_scene(scene, camera, settings), confidences, logits, w, h, settings);
}

Image render_heatmap(const SplatSet& scene, const Camera* camera, std::span<const double> confidences,
                     const RenderSettings& settings) {
    const auto [w, h] = output_size(scene, camera);
    if (confidences.size() != scene.size()) throw ContractError("render_heatmap: confidence length mismatch");
    ProjectedList projected = project_scene(scene, camera, settings);
    for (std::size_t i = 0; i < projected.size(); ++i) {
        if (projected[i]) projected[i]->view_color = confidence_colormap(confidences[i]);
    }
    std::vector<double> logits(scene.size());
    std::transform(scene.splats.begin(), scene.splats.end(), logits.begin(),
                   [](const Splat& s) { return s.opacity_logit; });
    return render_forward(projected, confidences, logits, w, h, settings).image;
}

}  // namespace confsplat::raster
