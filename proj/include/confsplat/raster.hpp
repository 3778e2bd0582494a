#pragma once

#include "confsplat/core.hpp"
#include "confsplat/image.hpp"

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace confsplat::raster {

struct RenderSettings {
    Rgb background{0.0, 0.0, 0.0};
    double alpha_min = 1.0 / 255.0;
    double alpha_max = 0.999;
    double transmittance_floor = 1e-4;
    double cov_dilation = 0.3;
    double near_plane = 0.01;

    void validate() const;
};

/// Screen-space footprint of one splat.
struct Projected2D {
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d cov = Eigen::Matrix2d::Identity();  // includes the dilation term
    double depth = 0.0;
    Rgb view_color{0.0, 0.0, 0.0};
    // Unit direction from the camera centre to the splat (3D mode); +z in 2D mode.
    Eigen::Vector3d view_dir = Eigen::Vector3d::UnitZ();
    // Channels whose SH value was clamped at zero; they receive no colour gradient.
    std::array<bool, 3> color_clamped{false, false, false};
};

/// One entry per splat; nullopt marks a culled splat.
using ProjectedList = std::vector<std::optional<Projected2D>>;

inline constexpr double kShC0 = 0.28209479177387814;

/// Real SH basis values Y_k(dir) for k < (degree + 1)^2, in the 3DGS ordering.
std::vector<double> sh_basis(const Eigen::Vector3d& dir, int degree);

/// sum_k coeffs[k] Y_k(dir) + 0.5 per channel, clamped at zero.
/// `coeffs` is coefficient-major (3 values per coefficient).
Rgb evaluate_sh(std::span<const double> coeffs, const Eigen::Vector3d& view_dir, int degree);

std::optional<Projected2D> project_splat(const Splat& splat, const SplatSet& scene, const Camera& camera,
                                         const RenderSettings& settings);

/// Identity projection used by 2D scenes: position.xy is the pixel mean.
Projected2D project_splat_2d(const Splat& splat, std::size_t index, const SplatSet& scene,
                             const RenderSettings& settings);

/// Projects every splat; `camera` must be non-null for 3D scenes and is ignored in 2D mode.
ProjectedList project_scene(const SplatSet& scene, const Camera* camera, const RenderSettings& settings);

struct Contribution {
    std::uint32_t splat = 0;
    bool clamped = false;   // alpha hit alpha_max
    double alpha = 0.0;
    double transmittance = 0.0;  // T before this splat
    double weight = 0.0;         // alpha * transmittance
};

/// Everything the backward pass and saliency accumulation need from a forward call.
struct RenderAux {
    int width = 0;
    int height = 0;
    std::size_t splat_count = 0;
    Rgb background{0.0, 0.0, 0.0};
    std::vector<std::uint32_t> depth_order;
    ProjectedList projected;
    std::vector<double> confidences;
    std::vector<double> opacity_sigmoid;
    std::vector<double> effective_opacity;
    // Contributions of pixel p are records[pixel_offsets[p] .. pixel_offsets[p + 1]), front to back.
    std::vector<std::size_t> pixel_offsets;
    std::vector<Contribution> records;
    std::vector<double> final_transmittance;
    std::size_t skipped_singular = 0;

    std::span<const Contribution> pixel_records(std::size_t pixel) const {
        return {records.data() + pixel_offsets[pixel], records.data() + pixel_offsets[pixel + 1]};
    }
};

struct RenderResult {
    Image image;
    RenderAux aux;
};

/// Front-to-back compositing with opacity sigmoid(logit) * confidence.
RenderResult render_forward(const ProjectedList& projected, std::span<const double> confidences,
                            std::span<const double> opacity_logits, int width, int height,
                            const RenderSettings& settings);

/// Gradients with respect to the screen-space quantities of each splat.
/// `d_cov` holds (xx, xy, yy) of the dilated covariance, the xy entry being
/// the shared off-diagonal parameter.
struct GradientSet {
    std::vector<double> d_opacity_logit;
    std::vector<double> d_confidence;
    std::vector<Rgb> d_view_color;
    std::vector<Eigen::Vector2d> d_mean;
    std::vector<Eigen::Vector3d> d_cov;
};

GradientSet render_backward(const RenderAux& aux, const Image& pixel_grads);

/// Parameter-space gradients. Geometry entries are filled in 2D mode only.
struct SceneGradients {
    std::vector<double> d_opacity_logit;
    std::vector<double> d_confidence;
    std::vector<double> d_color;  // color_size() values per splat, flattened
    std::vector<Eigen::Vector2d> d_position;
    std::vector<Eigen::Vector2d> d_log_scale;
    std::vector<double> d_angle;
};

SceneGradients chain_to_scene(const SplatSet& scene, const RenderAux& aux, const GradientSet& grads);

/// s_i = sum_p w_i(p) * |dL/dC(p)|_1. Detached: a plain value, never differentiated.
std::vector<double> accumulate_saliency(const RenderAux& aux, const Image& pixel_recon_grads);

/// Exponential moving average of per-splat saliency.
class SaliencyTracker {
public:
    SaliencyTracker(std::size_t n, double decay);
    void update(std::span<const double> saliency);
    const std::vector<double>& values() const { return ema_; }

private:
    std::vector<double> ema_;
    double decay_;
};

/// Viridis-style ramp: 0 is dark purple, 1 bright yellow.
Rgb confidence_colormap(double c);

RenderResult render_scene(const SplatSet& scene, const Camera* camera, std::span<const double> confidences,
                          const RenderSettings& settings);

/// Same compositing with every splat's colour replaced by confidence_colormap(c_i).
Image render_heatmap(const SplatSet& scene, const Camera* camera, std::span<const double> confidences,
                     const RenderSettings& settings);

/// Output size for a scene/camera pair (the canvas in 2D mode).
std::pair<int, int> output_size(const SplatSet& scene, const Camera* camera);

}  // namespace confsplat::raster
