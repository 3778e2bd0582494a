#include "confsplat/compress.hpp"

#include "confsplat/losses.hpp"

#include <cmath>
#include <limits>

namespace confsplat::compress {

PruneResult prune(const SplatSet& scene, const ConfidenceField& field, double tau) {
    field.validate(scene.size());
    PruneResult out;
    const auto conf = field.confidences();
    for (std::size_t i = 0; i < conf.size(); ++i) {
        if (conf[i] >= tau) out.kept_indices.push_back(i);
    }
    out.scene = select_splats(scene, out.kept_indices);
    out.field = select_confidence(field, out.kept_indices);
    return out;
}

double psnr(const Image& a, const Image& b) {
    require_same_shape(a, b, "psnr");
    if (a.data.empty()) throw ContractError("psnr: empty images");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        sum += d * d;
    }
    const double mse = sum / static_cast<double>(a.data.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Image& a, const Image& b) { return losses::ssim(a, b).value; }

double sqr(std::size_t num_splats, double psnr_db, double scale) {
    if (!(scale > 0.0)) throw ContractError("sqr: scale must be positive");
    if (std::isinf(psnr_db)) return 0.0;
    if (!(psnr_db >= 0.0)) throw ContractError("sqr: PSNR must be nonnegative");
    const double n = static_cast<double>(num_splats);
    if (n == 0.0 && psnr_db == 0.0) return 0.0;
    return n / (n + psnr_db * scale);
}

double sqr_scale(std::size_t original_count) {
    if (original_count == 0) return 1.0;
    // Integer digit count avoids log10 rounding at exact powers of ten.
    double scale = 1.0;
    for (std::size_t n = original_count; n >= 10; n /= 10) scale *= 10.0;
    return scale;
}

double acs(std::span<const double> confidences) {
    if (confidences.empty()) throw ContractError("acs: empty field");
    return losses::sparsity_loss(confidences).value;
}

double acs(const ConfidenceField& field) {
    const auto conf = field.confidences();
    return acs(conf);
}

std::size_t count_active(const ConfidenceField& field) {
    std::size_t n = 0;
    for (double c : field.confidences()) n += c >= losses::kActiveThreshold ? 1 : 0;
    return n;
}

std::vector<View> self_supervised_views(const SplatSet& scene, std::span<const Camera> cameras,
                                        const raster::RenderSettings& settings) {
    const std::vector<double> ones(scene.size(), 1.0);
    std::vector<View> views;
    if (scene.mode == SceneMode::TwoD) {
        views.push_back({std::nullopt, raster::render_scene(scene, nullptr, ones, settings).image});
        return views;
    }
    for (const Camera& cam : cameras) {
        views.push_back({cam, raster::render_scene(scene, &cam, ones, settings).image});
    }
    return views;
}

Evaluation evaluate(const SplatSet& scene, const ConfidenceField& field, std::span<const View> views,
                    const raster::RenderSettings& settings) {
    if (views.empty()) throw ContractError("evaluate: no views");
    const auto conf = field.confidences();
    Evaluation out;
    for (const View& v : views) {
        const Image img = raster::render_scene(scene, v.camera_ptr(), conf, settings).image;
        out.psnr += psnr(img, v.target);
        out.ssim += ssim(img, v.target);
    }
    out.psnr /= static_cast<double>(views.size());
    out.ssim /= static_cast<double>(views.size());
    return out;
}

std::vector<SweepRow> sweep(const SplatSet& scene, const ConfidenceField& field, std::span<const View> views,
                            std::span<const double> taus, const raster::RenderSettings& settings) {
    for (std::size_t i = 1; i < taus.size(); ++i) {
        if (taus[i] < taus[i - 1]) throw ContractError("sweep: taus must be sorted ascending");
    }
    const double scale = sqr_scale(scene.size());
    std::vector<SweepRow> rows;
    rows.reserve(taus.size());
    for (double tau : taus) {
        const PruneResult pruned = prune(scene, field, tau);
        const Evaluation eval = evaluate(pruned.scene, pruned.field, views, settings);
        SweepRow row;
        row.tau = tau;
        row.kept = pruned.kept_indices.size();
        row.psnr = eval.psnr;
        row.ssim = eval.ssim;
        row.sqr = sqr(row.kept, std::max(eval.psnr, 0.0), scale);
        row.acs = pruned.field.empty() ? 0.0 : acs(pruned.field);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace confsplat::compress
