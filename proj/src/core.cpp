#include "confsplat/core.hpp"

#include "confsplat/betaconf.hpp"

#include <cmath>
#include <string>

namespace confsplat {

double Splat::angle_2d() const { return 2.0 * std::atan2(rotation[3], rotation[0]); }

void Splat::set_angle_2d(double angle) { rotation = Eigen::Vector4d(std::cos(0.5 * angle), 0.0, 0.0, std::sin(0.5 * angle)); }

void SplatSet::validate() const {
    if (splats.empty()) {
        throw ContractError("SplatSet: must contain at least one splat");
    }
    if (color_kind == ColorKind::Sh && (sh_degree < 0 || sh_degree > 3)) {
        throw ContractError("SplatSet: SH degree must be in [0, 3], got " + std::to_string(sh_degree));
    }
    if (mode == SceneMode::TwoD && (canvas_width < 1 || canvas_height < 1)) {
        throw ContractError("SplatSet: 2D scenes need a positive canvas size");
    }
    const std::size_t expected = color_size();
    for (std::size_t i = 0; i < splats.size(); ++i) {
        const Splat& s = splats[i];
        if (s.color.size() != expected) {
            throw ContractError("SplatSet: splat " + std::to_string(i) + " has " + std::to_string(s.color.size()) +
                                " color values, expected " + std::to_string(expected));
        }
        if (!s.log_scale.allFinite() || !s.position.allFinite() || !std::isfinite(s.opacity_logit)) {
            throw ContractError("SplatSet: splat " + std::to_string(i) + " has non-finite attributes");
        }
        // Stored quaternions may be unnormalised (3DGS exports); they are normalised at use.
        if (!s.rotation.allFinite() || !(s.rotation.norm() > 1e-12)) {
            throw ContractError("SplatSet: splat " + std::to_string(i) + " rotation cannot be normalised");
        }
    }
}

ConfidenceField ConfidenceField::uniform(std::size_t n, double raw) {
    return {std::vector<double>(n, raw), std::vector<double>(n, raw)};
}

std::vector<double> ConfidenceField::confidences() const {
    std::vector<double> out(raw_alpha.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = betaconf::confidence(raw_alpha[i], raw_beta[i]).value;
    }
    return out;
}

void ConfidenceField::validate(std::size_t expected_size) const {
    if (raw_alpha.size() != raw_beta.size()) {
        throw ContractError("ConfidenceField: alpha and beta lengths differ");
    }
    if (raw_alpha.size() != expected_size) {
        throw ContractError("ConfidenceField: length " + std::to_string(raw_alpha.size()) +
                            " does not match scene size " + std::to_string(expected_size));
    }
    for (std::size_t i = 0; i < raw_alpha.size(); ++i) {
        if (!std::isfinite(raw_alpha[i]) || !std::isfinite(raw_beta[i])) {
            throw ContractError("ConfidenceField: non-finite entry at " + std::to_string(i));
        }
    }
}

void Camera::validate() const {
    if (width < 1 || height < 1) {
        throw ContractError("Camera: width and height must be >= 1");
    }
    const Eigen::Matrix3d gram = rotation * rotation.transpose();
    if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-6) {
        throw ContractError("Camera: rotation is not orthonormal");
    }
    if (!(fx > 0.0) || !(fy > 0.0)) {
        throw ContractError("Camera: focal lengths must be positive");
    }
}

void LossWeights::validate() const {
    if (lambda_sparse < 0.0 || lambda_entropy < 0.0 || lambda_saliency < 0.0) {
        throw ContractError("LossWeights: lambdas must be nonnegative");
    }
    if (recon_ssim_mix < 0.0 || recon_ssim_mix > 1.0) {
        throw ContractError("LossWeights: recon_ssim_mix must lie in [0, 1]");
    }
}

void SaliencyConfig::validate() const {
    if (pairs_per_step < 1) {
        throw ContractError("SaliencyConfig: pairs_per_step must be positive");
    }
    if (!(quantile > 0.0 && quantile <= 0.5)) {
        throw ContractError("SaliencyConfig: quantile must lie in (0, 0.5]");
    }
    if (!(ema_decay >= 0.0 && ema_decay < 1.0)) {
        throw ContractError("SaliencyConfig: ema_decay must lie in [0, 1)");
    }
}

SplatSet select_splats(const SplatSet& scene, const std::vector<std::size_t>& keep) {
    SplatSet out;
    out.mode = scene.mode;
    out.color_kind = scene.color_kind;
    out.sh_degree = scene.sh_degree;
    out.canvas_width = scene.canvas_width;
    out.canvas_height = scene.canvas_height;
    out.splats.reserve(keep.size());
    for (std::size_t i : keep) out.splats.push_back(scene.splats.at(i));
    return out;
}

ConfidenceField select_confidence(const ConfidenceField& field, const std::vector<std::size_t>& keep) {
    ConfidenceField out;
    out.raw_alpha.reserve(keep.size());
    out.raw_beta.reserve(keep.size());
    for (std::size_t i : keep) {
        out.raw_alpha.push_back(field.raw_alpha.at(i));
        out.raw_beta.push_back(field.raw_beta.at(i));
    }
    return out;
}

}  // namespace confsplat
