#pragma once

#include "confsplat/betaconf.hpp"
#include "confsplat/compress.hpp"
#include "confsplat/core.hpp"
#include "confsplat/image.hpp"
#include "confsplat/losses.hpp"
#include "confsplat/raster.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace confsplat::train {

/// Bias-corrected Adam over one flat parameter group.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    AdamState() = default;
    AdamState(std::size_t n, double learning_rate);
};

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

struct GumbelConfig {
    bool enabled = false;
    betaconf::GumbelMode mode = betaconf::GumbelMode::Additive;
    double temperature = 2.0;
};

struct TrainConfig {
    int iterations = 3000;
    double lr_confidence = 0.01;
    // Mode A only.
    double lr_position = 0.05;
    double lr_scale = 0.01;
    double lr_rotation = 0.01;
    double lr_color = 0.01;
    double lr_opacity = 0.05;
    // Exponential decay of the Mode A geometry/colour/opacity rates down to
    // lr * lr_final_ratio at the last iteration. 1 keeps them constant.
    double lr_final_ratio = 1.0;
    LossWeights weights;
    SaliencyConfig saliency;
    std::uint64_t seed = 42;
    int snapshot_every = 10;
    int cameras_per_step = 1;
    GumbelConfig gumbel;

    void validate() const;
};

struct HistoryEntry {
    int iteration = 0;
    losses::LossBreakdown loss;
    std::size_t active = 0;
    double mean_confidence = 0.0;
    bool degenerate_pairs = false;
};

struct FitResult {
    SplatSet scene;
    ConfidenceField field;
    std::vector<HistoryEntry> history;
};

/// Initial Mode A scene: jittered grid with colours sampled from the target.
SplatSet init_2d_scene(const Image& target, std::size_t n_splats, std::uint64_t seed);

/// Mode A: joint optimisation of a 2D splat image and its confidences.
FitResult fit_2d(const Image& target, std::size_t n_splats, const TrainConfig& cfg,
                 const raster::RenderSettings& settings);

/// Same loop starting from a caller-provided scene.
FitResult fit_2d(const Image& target, SplatSet scene, const TrainConfig& cfg, const raster::RenderSettings& settings);

/// Mode B: fits only the confidence field on a frozen scene.
FitResult fit_confidence(const SplatSet& scene, std::span<const compress::View> views, const TrainConfig& cfg,
                         const raster::RenderSettings& settings,
                         const std::optional<ConfidenceField>& init = std::nullopt);

}  // namespace confsplat::train
