#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace confsplat {

/// Raised when a caller violates an operation's precondition (bad domain,
/// mismatched lengths, unknown layout). Data errors from files use
/// `DataError`; numerical blow-ups use `DivergenceError`.
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class SceneMode { TwoD, ThreeD };

enum class ColorKind {
    Rgb,  // three plain channels in [0,1]
    Sh,   // spherical-harmonic block, coefficient-major: coeff k, channel c at [3k + c]
};

/// Number of SH coefficients per channel for a given degree.
constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

/// Floor added after softplus so that alpha and beta never reach zero.
inline constexpr double kConfidenceEpsilon = 1e-4;

/// softplus^-1(1.0): raw value that activates to Beta(1, 1) up to the epsilon floor.
inline constexpr double kRawConfidenceInit = 0.54132485461291810;

/// One anisotropic Gaussian primitive.
///
/// In 2D mode `position` holds pixel coordinates with z = 0, `log_scale`
/// uses only x and y, and `rotation` is a quaternion about +z (see
/// `angle_2d`). Quaternions are stored (w, x, y, z).
struct Splat {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Vector3d log_scale = Eigen::Vector3d::Zero();
    Eigen::Vector4d rotation{1.0, 0.0, 0.0, 0.0};
    std::vector<double> color;
    double opacity_logit = 0.0;

    double angle_2d() const;
    void set_angle_2d(double angle);
};

struct SplatSet {
    std::vector<Splat> splats;
    SceneMode mode = SceneMode::ThreeD;
    ColorKind color_kind = ColorKind::Sh;
    int sh_degree = 0;
    // Canvas size for 2D scenes (the identity camera's image size).
    int canvas_width = 0;
    int canvas_height = 0;

    std::size_t size() const { return splats.size(); }
    bool empty() const { return splats.empty(); }
    std::size_t color_size() const {
        return color_kind == ColorKind::Rgb ? 3 : static_cast<std::size_t>(3 * sh_coeff_count(sh_degree));
    }

    /// Throws ContractError when the set breaks a type invariant.
    void validate() const;
};

/// Raw pre-softplus Beta parameters, one pair per splat.
struct ConfidenceField {
    std::vector<double> raw_alpha;
    std::vector<double> raw_beta;

    static ConfidenceField uniform(std::size_t n, double raw = kRawConfidenceInit);

    std::size_t size() const { return raw_alpha.size(); }
    bool empty() const { return raw_alpha.empty(); }

    /// Expected confidence of every splat.
    std::vector<double> confidences() const;

    void validate(std::size_t expected_size) const;
};

/// Pinhole camera, OpenCV convention: +z forward, +y down, +x right.
/// A world point p maps to view space as R p + t.
struct Camera {
    int id = 0;
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 1;
    int height = 1;

    Eigen::Vector3d center() const { return -rotation.transpose() * translation; }
    void validate() const;
};

struct LossWeights {
    double lambda_sparse = 0.01;
    double lambda_entropy = 0.001;
    double lambda_saliency = 0.01;
    double recon_ssim_mix = 0.2;

    void validate() const;
};

struct SaliencyConfig {
    int pairs_per_step = 256;
    double quantile = 0.25;
    double ema_decay = 0.9;

    void validate() const;
};

struct SweepRow {
    double tau = 0.0;
    std::size_t kept = 0;
    double psnr = 0.0;
    double ssim = 0.0;
    double sqr = 0.0;
    double acs = 0.0;
};

/// Keeps entries whose index is listed in `keep`, in order.
SplatSet select_splats(const SplatSet& scene, const std::vector<std::size_t>& keep);
ConfidenceField select_confidence(const ConfidenceField& field, const std::vector<std::size_t>& keep);

}  // namespace confsplat
