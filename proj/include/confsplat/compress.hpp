#pragma once

#include "confsplat/core.hpp"
#include "confsplat/image.hpp"
#include "confsplat/raster.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace confsplat::compress {

struct PruneResult {
    SplatSet scene;
    ConfidenceField field;
    std::vector<std::size_t> kept_indices;  // positions in the input scene
};

/// Keeps the splats with c_i >= tau, preserving order. The result may be empty.
PruneResult prune(const SplatSet& scene, const ConfidenceField& field, double tau);

/// 10 log10(1 / MSE); +infinity for identical images.
double psnr(const Image& a, const Image& b);

/// Mean SSIM (no gradient).
double ssim(const Image& a, const Image& b);

/// Splats-to-quality ratio n / (n + psnr * scale); an infinite PSNR gives 0.
double sqr(std::size_t num_splats, double psnr_db, double scale);

/// 10^floor(log10(n)) for the uncompressed scene size (1 for n == 0).
double sqr_scale(std::size_t original_count);

/// Average confidence; identical to the sparsity loss value.
double acs(const ConfidenceField& field);
double acs(std::span<const double> confidences);

/// Number of splats with c_i >= 0.5.
std::size_t count_active(const ConfidenceField& field);

/// A viewpoint with its reference image. No camera means the 2D identity view.
struct View {
    std::optional<Camera> camera;
    Image target;

    const Camera* camera_ptr() const { return camera ? &*camera : nullptr; }
};

/// Renders every view with all confidences at 1 (the unmodulated scene).
std::vector<View> self_supervised_views(const SplatSet& scene, std::span<const Camera> cameras,
                                        const raster::RenderSettings& settings);

struct Evaluation {
    double psnr = 0.0;
    double ssim = 0.0;
};

/// Mean PSNR / SSIM of the confidence-modulated render over all views.
Evaluation evaluate(const SplatSet& scene, const ConfidenceField& field, std::span<const View> views,
                    const raster::RenderSettings& settings);

/// One row per tau (ascending), each pruning the original scene independently.
std::vector<SweepRow> sweep(const SplatSet& scene, const ConfidenceField& field, std::span<const View> views,
                            std::span<const double> taus, const raster::RenderSettings& settings);

}  // namespace confsplat::compress
