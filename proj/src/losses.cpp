#include "confsplat/losses.hpp"

#include "confsplat/betaconf.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

namespace confsplat::losses {

namespace {

using Plane = std::vector<double>;

std::array<double, kSsimWindow> gaussian_window() {
    std::array<double, kSsimWindow> w{};
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double d = i - kSsimWindow / 2;
        w[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
}

// Separable correlation keeping only fully covered windows.
Plane filter_valid(const Plane& in, int w, int h) {
    static const auto win = gaussian_window();
    const int ow = w - kSsimWindow + 1;
    const int oh = h - kSsimWindow + 1;
    Plane tmp(static_cast<std::size_t>(ow) * h, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int k = 0; k < kSsimWindow; ++k) s += win[k] * in[static_cast<std::size_t>(y) * w + x + k];
            tmp[static_cast<std::size_t>(y) * ow + x] = s;
        }
    }
    Plane out(static_cast<std::size_t>(ow) * oh, 0.0);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int k = 0; k < kSsimWindow; ++k) s += win[k] * tmp[static_cast<std::size_t>(y + k) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = s;
        }
    }
    return out;
}

// Adjoint of filter_valid: scatters each window value back over its footprint.
Plane scatter_full(const Plane& in, int w, int h) {
    static const auto win = gaussian_window();
    const int ow = w - kSsimWindow + 1;
    const int oh = h - kSsimWindow + 1;
    Plane tmp(static_cast<std::size_t>(ow) * h, 0.0);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            const double v = in[static_cast<std::size_t>(y) * ow + x];
            for (int k = 0; k < kSsimWindow; ++k) tmp[static_cast<std::size_t>(y + k) * ow + x] += win[k] * v;
        }
    }
    Plane out(static_cast<std::size_t>(w) * h, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < ow; ++x) {
            const double v = tmp[static_cast<std::size_t>(y) * ow + x];
            for (int k = 0; k < kSsimWindow; ++k) out[static_cast<std::size_t>(y) * w + x + k] += win[k] * v;
        }
    }
    return out;
}

Plane channel(const Image& img, int c) {
    Plane p(img.pixel_count());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = img.data[3 * i + static_cast<std::size_t>(c)];
    return p;
}

}  // namespace

ImageLoss l1_loss(const Image& a, const Image& b) {
    require_same_shape(a, b, "l1_loss");
    const double count = static_cast<double>(a.value_count());
    if (count == 0.0) throw ContractError("l1_loss: empty images");
    ImageLoss out{0.0, Image(a.width, a.height)};
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        out.value += std::abs(d);
        out.grad.data[i] = d > 0.0 ? 1.0 / count : (d < 0.0 ? -1.0 / count : 0.0);
    }
    out.value /= count;
    return out;
}

ImageLoss ssim(const Image& a, const Image& b) {
    require_same_shape(a, b, "ssim");
    if (a.width < kSsimWindow || a.height < kSsimWindow) {
        throw ContractError("ssim: images must be at least 11x11");
    }
    const int w = a.width;
    const int h = a.height;
    const std::size_t windows = static_cast<std::size_t>(w - kSsimWindow + 1) * (h - kSsimWindow + 1);
    const double norm = 1.0 / (3.0 * static_cast<double>(windows));

    ImageLoss out{0.0, Image(w, h)};
    for (int c = 0; c < 3; ++c) {
        const Plane x = channel(a, c);
        const Plane y = channel(b, c);
        Plane xx(x.size()), yy(x.size()), xy(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        const Plane mu_x = filter_valid(x, w, h);
        const Plane mu_y = filter_valid(y, w, h);
        const Plane e_xx = filter_valid(xx, w, h);
        const Plane e_yy = filter_valid(yy, w, h);
        const Plane e_xy = filter_valid(xy, w, h);

        Plane d_mu(windows), d_var(windows), d_cov(windows);
        for (std::size_t q = 0; q < windows; ++q) {
            const double mx = mu_x[q];
            const double my = mu_y[q];
            const double var_x = e_xx[q] - mx * mx;
            const double var_y = e_yy[q] - my * my;
            const double cov = e_xy[q] - mx * my;
            const double l_num = 2.0 * mx * my + kSsimC1;
            const double l_den = mx * mx + my * my + kSsimC1;
            const double cs_num = 2.0 * cov + kSsimC2;
            const double cs_den = var_x + var_y + kSsimC2;
            const double s = (l_num * cs_num) / (l_den * cs_den);
            out.value += s * norm;

            const double ds_dmu = s * (2.0 * my / l_num - 2.0 * mx / l_den);
            const double ds_dvar = -s / cs_den;
            const double ds_dcov = 2.0 * s / cs_num;
            // Per-pixel: w * (ds_dmu - 2 ds_dvar mx - ds_dcov my) + 2 x w ds_dvar + y w ds_dcov
            d_mu[q] = norm * (ds_dmu - 2.0 * ds_dvar * mx - ds_dcov * my);
            d_var[q] = norm * ds_dvar;
            d_cov[q] = norm * ds_dcov;
        }
        const Plane g_mu = scatter_full(d_mu, w, h);
        const Plane g_var = scatter_full(d_var, w, h);
        const Plane g_cov = scatter_full(d_cov, w, h);
        for (std::size_t i = 0; i < x.size(); ++i) {
            out.grad.data[3 * i + static_cast<std::size_t>(c)] = g_mu[i] + 2.0 * x[i] * g_var[i] + y[i] * g_cov[i];
        }
    }
    return out;
}

ImageLoss reconstruction_loss(const Image& render, const Image& target, double mix) {
    if (!(mix >= 0.0 && mix <= 1.0)) throw ContractError("reconstruction_loss: mix must lie in [0, 1]");
    ImageLoss l1 = l1_loss(render, target);
    if (mix == 0.0) return l1;
    const ImageLoss s = ssim(render, target);
    ImageLoss out{(1.0 - mix) * l1.value + mix * (1.0 - s.value), Image(render.width, render.height)};
    for (std::size_t i = 0; i < out.grad.data.size(); ++i) {
        out.grad.data[i] = (1.0 - mix) * l1.grad.data[i] - mix * s.grad.data[i];
    }
    return out;
}

SplatLoss sparsity_loss(std::span<const double> confidences) {
    if (confidences.empty()) throw ContractError("sparsity_loss: empty confidence list");
    const double n = static_cast<double>(confidences.size());
    double sum = 0.0;
    for (double c : confidences) sum += c;
    return {sum / n, std::vector<double>(confidences.size(), 1.0 / n)};
}

FieldLoss entropy_loss(const ConfidenceField& field) {
    if (field.empty()) throw ContractError("entropy_loss: empty field");
    const std::size_t n = field.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    FieldLoss out{0.0, std::vector<double>(n), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = betaconf::activate(field.raw_alpha[i], field.raw_beta[i]);
        out.value -= betaconf::beta_entropy(p);
        const auto [dh_da, dh_db] = betaconf::beta_entropy_grad(p);
        out.d_raw_alpha[i] = -dh_da * betaconf::sigmoid(field.raw_alpha[i]) * inv_n;
        out.d_raw_beta[i] = -dh_db * betaconf::sigmoid(field.raw_beta[i]) * inv_n;
    }
    out.value *= inv_n;
    return out;
}

PairSample sample_saliency_pairs(std::span<const double> saliency, const SaliencyConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const std::size_t n = saliency.size();
    if (n < 2) throw ContractError("sample_saliency_pairs: need at least two splats");

    PairSample out;
    const auto [lo, hi] = std::minmax_element(saliency.begin(), saliency.end());
    if (*hi - *lo < 1e-12) {
        out.degenerate = true;
        return out;
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return saliency[a] > saliency[b]; });
    const std::size_t pool = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(cfg.quantile * static_cast<double>(n))));
    const std::span<const std::size_t> top(order.data(), pool);
    const std::span<const std::size_t> bottom(order.data() + (n - pool), pool);

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, pool - 1);
    const auto k = static_cast<std::size_t>(cfg.pairs_per_step);
    const std::size_t max_attempts = 10 * k;
    out.pairs.reserve(k);
    for (std::size_t attempt = 0; attempt < max_attempts && out.pairs.size() < k; ++attempt) {
        const std::size_t i = top[pick(rng)];
        const std::size_t j = bottom[pick(rng)];
        if (std::abs(saliency[i] - saliency[j]) < 1e-12) continue;
        out.pairs.emplace_back(i, j);
    }
    return out;
}

SplatLoss saliency_ranking_loss(std::span<const SplatPair> pairs, std::span<const double> confidences) {
    SplatLoss out{0.0, std::vector<double>(confidences.size(), 0.0)};
    if (pairs.empty()) return out;
    const double inv_k = 1.0 / static_cast<double>(pairs.size());
    for (const auto& [i, j] : pairs) {
        if (i >= confidences.size() || j >= confidences.size()) {
            throw ContractError("saliency_ranking_loss: pair index out of range");
        }
        const double margin = 1.0 + confidences[j] - confidences[i];
        if (margin > 0.0) {
            out.value += margin;
            out.grad[i] -= inv_k;
            out.grad[j] += inv_k;
        }
    }
    out.value *= inv_k;
    return out;
}

LossBreakdown total_loss(const LossParts& parts, const LossWeights& weights) {
    weights.validate();
    LossBreakdown out;
    out.recon = parts.recon;
    out.sparse = parts.sparse;
    out.entropy = parts.entropy;
    out.saliency = parts.saliency;
    out.weighted_sparse = weights.lambda_sparse * parts.sparse;
    out.weighted_entropy = weights.lambda_entropy * parts.entropy;
    out.weighted_saliency = weights.lambda_saliency * parts.saliency;
    out.total = parts.recon + out.weighted_sparse + out.weighted_entropy + out.weighted_saliency;
    return out;
}

}  // namespace confsplat::losses
