#pragma once

#include "confsplat/core.hpp"
#include "confsplat/image.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace confsplat::losses {

/// A scalar image loss and its gradient with respect to the first image.
struct ImageLoss {
    double value = 0.0;
    Image grad;
};

struct SplatLoss {
    double value = 0.0;
    std::vector<double> grad;  // d value / d c_i
};

struct FieldLoss {
    double value = 0.0;
    std::vector<double> d_raw_alpha;
    std::vector<double> d_raw_beta;
};

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Splats with c >= this are counted as active.
inline constexpr double kActiveThreshold = 0.5;

ImageLoss l1_loss(const Image& a, const Image& b);

/// Mean SSIM over valid 11x11 Gaussian windows and channels; `grad` is dSSIM/da.
ImageLoss ssim(const Image& a, const Image& b);

/// (1 - mix) * L1 + mix * (1 - SSIM).
ImageLoss reconstruction_loss(const Image& render, const Image& target, double mix);

/// Mean confidence.
SplatLoss sparsity_loss(std::span<const double> confidences);

/// Mean of -H(Beta(softplus(raw_alpha) + eps, softplus(raw_beta) + eps)).
FieldLoss entropy_loss(const ConfidenceField& field);

using SplatPair = std::pair<std::size_t, std::size_t>;

struct PairSample {
    std::vector<SplatPair> pairs;  // (more salient, less salient)
    bool degenerate = false;       // every saliency value was equal
};

PairSample sample_saliency_pairs(std::span<const double> saliency, const SaliencyConfig& cfg, std::uint64_t seed);

/// (1/K) sum max(0, 1 + c_j - c_i) with K the number of pairs.
SplatLoss saliency_ranking_loss(std::span<const SplatPair> pairs, std::span<const double> confidences);

struct LossParts {
    double recon = 0.0;
    double sparse = 0.0;
    double entropy = 0.0;
    double saliency = 0.0;
};

struct LossBreakdown {
    double total = 0.0;
    double recon = 0.0;
    double sparse = 0.0;
    double entropy = 0.0;
    double saliency = 0.0;
    double weighted_sparse = 0.0;
    double weighted_entropy = 0.0;
    double weighted_saliency = 0.0;
};

LossBreakdown total_loss(const LossParts& parts, const LossWeights& weights);

}  // namespace confsplat::losses
