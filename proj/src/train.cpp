#include "confsplat/train.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace confsplat::train {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t step) {
    // splitmix64 finaliser
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (step + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

struct StepResult {
    losses::LossBreakdown loss;
    std::vector<double> d_raw_alpha;
    std::vector<double> d_raw_beta;
    raster::SceneGradients scene_grads;
    bool degenerate_pairs = false;
};

void add_into(std::vector<double>& dst, const std::vector<double>& src) {
    if (dst.empty()) {
        dst = src;
        return;
    }
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename V>
void add_into(std::vector<V>& dst, const std::vector<V>& src) {
    if (dst.empty()) {
        dst = src;
        return;
    }
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// One optimisation step's losses and gradients over a batch of views.
StepResult compute_step(const SplatSet& scene, const ConfidenceField& field,
                        std::span<const compress::View* const> batch, const TrainConfig& cfg,
                        const raster::RenderSettings& settings, raster::SaliencyTracker& tracker,
                        std::uint64_t step_seed) {
    const std::size_t n = scene.size();
    std::vector<double> conf(n);
    std::vector<double> dc_dra(n);
    std::vector<double> dc_drb(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto cv = betaconf::confidence(field.raw_alpha[i], field.raw_beta[i]);
        conf[i] = cv.value;
        dc_dra[i] = cv.d_raw_alpha;
        dc_drb[i] = cv.d_raw_beta;
    }

    // Confidence used for opacity modulation (optionally Gumbel-perturbed).
    std::vector<double> modulation = conf;
    std::vector<double> dmod_dc(n, 1.0);
    if (cfg.gumbel.enabled) {
        std::mt19937_64 rng(mix_seed(step_seed, 0x6a6d));
        std::uniform_real_distribution<double> uni(std::nextafter(0.0, 1.0), 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            double u = uni(rng);
            if (u >= 1.0) u = std::nextafter(1.0, 0.0);
            const auto gv = betaconf::gumbel_confidence_variant(conf[i], betaconf::gumbel_from_uniform(u),
                                                                cfg.gumbel.temperature, cfg.gumbel.mode);
            modulation[i] = gv.value;
            dmod_dc[i] = gv.d_confidence;
        }
    }

    StepResult out;
    std::vector<double> logits(n);
    for (std::size_t i = 0; i < n; ++i) logits[i] = scene.splats[i].opacity_logit;
    const double view_weight = 1.0 / static_cast<double>(batch.size());
    std::vector<double> saliency(n, 0.0);
    double recon = 0.0;
    for (const compress::View* view : batch) {
        const Camera* cam = view->camera_ptr();
        const auto [w, h] = raster::output_size(scene, cam);
        auto rendered = raster::render_forward(raster::project_scene(scene, cam, settings), modulation, logits, w, h,
                                               settings);
        auto rec = losses::reconstruction_loss(rendered.image, view->target, cfg.weights.recon_ssim_mix);
        recon += view_weight * rec.value;
        for (double& g : rec.grad.data) g *= view_weight;
        const auto sal = raster::accumulate_saliency(rendered.aux, rec.grad);
        for (std::size_t i = 0; i < n; ++i) saliency[i] += sal[i];
        const auto grads = raster::render_backward(rendered.aux, rec.grad);
        auto sg = raster::chain_to_scene(scene, rendered.aux, grads);
        add_into(out.scene_grads.d_opacity_logit, sg.d_opacity_logit);
        add_into(out.scene_grads.d_confidence, sg.d_confidence);
        add_into(out.scene_grads.d_color, sg.d_color);
        add_into(out.scene_grads.d_position, sg.d_position);
        add_into(out.scene_grads.d_log_scale, sg.d_log_scale);
        add_into(out.scene_grads.d_angle, sg.d_angle);
    }
    tracker.update(saliency);

    // A single splat has nothing to rank against.
    const auto pairs = n >= 2 ? losses::sample_saliency_pairs(tracker.values(), cfg.saliency, step_seed)
                              : losses::PairSample{{}, true};
    out.degenerate_pairs = pairs.degenerate;
    const auto sparse = losses::sparsity_loss(conf);
    const auto entropy = losses::entropy_loss(field);
    const auto ranking = losses::saliency_ranking_loss(pairs.pairs, conf);
    out.loss = losses::total_loss({recon, sparse.value, entropy.value, ranking.value}, cfg.weights);
    if (!std::isfinite(out.loss.total)) {
        throw DivergenceError("training diverged: total loss is not finite");
    }

    const auto& wts = cfg.weights;
    out.d_raw_alpha.resize(n);
    out.d_raw_beta.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d_conf = out.scene_grads.d_confidence[i] * dmod_dc[i] + wts.lambda_sparse * sparse.grad[i] +
                              wts.lambda_saliency * ranking.grad[i];
        out.d_raw_alpha[i] = d_conf * dc_dra[i] + wts.lambda_entropy * entropy.d_raw_alpha[i];
        out.d_raw_beta[i] = d_conf * dc_drb[i] + wts.lambda_entropy * entropy.d_raw_beta[i];
    }
    return out;
}

HistoryEntry snapshot(int iteration, const StepResult& step, const ConfidenceField& field) {
    HistoryEntry h;
    h.iteration = iteration;
    h.loss = step.loss;
    const auto conf = field.confidences();
    h.mean_confidence = compress::acs(conf);
    h.active = compress::count_active(field);
    h.degenerate_pairs = step.degenerate_pairs;
    return h;
}

void check_finite(std::span<const double> values, const char* what) {
    for (double v : values) {
        if (!std::isfinite(v)) throw DivergenceError(std::string("training diverged: non-finite ") + what);
    }
}

}  // namespace

AdamState::AdamState(std::size_t n, double learning_rate) : m(n, 0.0), v(n, 0.0), lr(learning_rate) {}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
    if (params.size() != grads.size() || params.size() != state.m.size() || state.v.size() != state.m.size()) {
        throw ContractError("adam_step: parameter, gradient and moment shapes differ");
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
}

void TrainConfig::validate() const {
    if (iterations < 0) throw ContractError("TrainConfig: iterations must be nonnegative");
    for (double lr : {lr_confidence, lr_position, lr_scale, lr_rotation, lr_color, lr_opacity}) {
        if (!(lr > 0.0)) throw ContractError("TrainConfig: learning rates must be positive");
    }
    if (!(lr_final_ratio > 0.0 && lr_final_ratio <= 1.0)) {
        throw ContractError("TrainConfig: lr_final_ratio must lie in (0, 1]");
    }
    if (snapshot_every < 1) throw ContractError("TrainConfig: snapshot_every must be positive");
    if (cameras_per_step < 1) throw ContractError("TrainConfig: cameras_per_step must be positive");
    if (gumbel.enabled && !(gumbel.temperature > 0.0)) {
        throw ContractError("TrainConfig: gumbel temperature must be positive");
    }
    weights.validate();
    saliency.validate();
}

SplatSet init_2d_scene(const Image& target, std::size_t n_splats, std::uint64_t seed) {
    if (n_splats < 1) throw ContractError("init_2d_scene: need at least one splat");
    if (target.width < 1 || target.height < 1) throw ContractError("init_2d_scene: empty target");
    SplatSet scene;
    scene.mode = SceneMode::TwoD;
    scene.color_kind = ColorKind::Rgb;
    scene.canvas_width = target.width;
    scene.canvas_height = target.height;

    const double w = target.width;
    const double h = target.height;
    const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_splats) * w / h)));
    const std::size_t rows = (n_splats + cols - 1) / cols;
    const double cell_w = w / static_cast<double>(cols);
    const double cell_h = h / static_cast<double>(rows);
    std::mt19937_64 rng(mix_seed(seed, 0x1a17));
    std::uniform_real_distribution<double> jitter(-0.25, 0.25);

    scene.splats.reserve(n_splats);
    for (std::size_t k = 0; k < n_splats; ++k) {
        Splat s;
        const double x = (static_cast<double>(k % cols) + 0.5 + jitter(rng)) * cell_w;
        const double y = (static_cast<double>(k / cols) + 0.5 + jitter(rng)) * cell_h;
        s.position = {x, y, 0.0};
        const double log_sigma = std::log(0.5 * std::max(std::min(cell_w, cell_h), 0.5));
        s.log_scale = {log_sigma, log_sigma, log_sigma};
        s.set_angle_2d(0.0);
        const int px = std::clamp(static_cast<int>(x), 0, target.width - 1);
        const int py = std::clamp(static_cast<int>(y), 0, target.height - 1);
        s.color = {target.at(px, py, 0), target.at(px, py, 1), target.at(px, py, 2)};
        s.opacity_logit = 2.0;
        scene.splats.push_back(std::move(s));
    }
    return scene;
}

FitResult fit_2d(const Image& target, std::size_t n_splats, const TrainConfig& cfg,
                 const raster::RenderSettings& settings) {
    return fit_2d(target, init_2d_scene(target, n_splats, cfg.seed), cfg, settings);
}

FitResult fit_2d(const Image& target, SplatSet scene, const TrainConfig& cfg, const raster::RenderSettings& settings) {
    cfg.validate();
    settings.validate();
    if (scene.mode != SceneMode::TwoD || scene.color_kind != ColorKind::Rgb) {
        throw ContractError("fit_2d: expects a 2D scene with RGB colours");
    }
    for (double v : target.data) {
        if (!(v >= 0.0 && v <= 1.0)) throw ContractError("fit_2d: target values must lie in [0, 1]");
    }
    scene.canvas_width = target.width;
    scene.canvas_height = target.height;
    scene.validate();

    const std::size_t n = scene.size();
    FitResult result;
    result.field = ConfidenceField::uniform(n);

    // Flat parameter groups.
    std::vector<double> pos(2 * n), scl(2 * n), ang(n), col(3 * n), opa(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Splat& s = scene.splats[i];
        pos[2 * i] = s.position.x();
        pos[2 * i + 1] = s.position.y();
        scl[2 * i] = s.log_scale.x();
        scl[2 * i + 1] = s.log_scale.y();
        ang[i] = s.angle_2d();
        for (int c = 0; c < 3; ++c) col[3 * i + c] = s.color[c];
        opa[i] = s.opacity_logit;
    }
    AdamState adam_pos(2 * n, cfg.lr_position), adam_scl(2 * n, cfg.lr_scale), adam_ang(n, cfg.lr_rotation),
        adam_col(3 * n, cfg.lr_color), adam_opa(n, cfg.lr_opacity), adam_ra(n, cfg.lr_confidence),
        adam_rb(n, cfg.lr_confidence);

    auto write_back = [&] {
        for (std::size_t i = 0; i < n; ++i) {
            Splat& s = scene.splats[i];
            s.position = {pos[2 * i], pos[2 * i + 1], 0.0};
            s.log_scale = {scl[2 * i], scl[2 * i + 1], std::min(scl[2 * i], scl[2 * i + 1])};
            s.set_angle_2d(ang[i]);
            s.color.assign(col.begin() + static_cast<std::ptrdiff_t>(3 * i),
                           col.begin() + static_cast<std::ptrdiff_t>(3 * i + 3));
            s.opacity_logit = opa[i];
        }
    };

    const compress::View view{std::nullopt, target};
    const compress::View* batch[] = {&view};
    raster::SaliencyTracker tracker(n, cfg.saliency.ema_decay);
    const std::vector<AdamState*> decayed{&adam_pos, &adam_scl, &adam_ang, &adam_col, &adam_opa};
    const std::vector<double> base_lr{cfg.lr_position, cfg.lr_scale, cfg.lr_rotation, cfg.lr_color, cfg.lr_opacity};

    for (int it = 0; it < cfg.iterations; ++it) {
        const StepResult step =
            compute_step(scene, result.field, batch, cfg, settings, tracker, mix_seed(cfg.seed, static_cast<std::uint64_t>(it)));
        if (it % cfg.snapshot_every == 0) result.history.push_back(snapshot(it, step, result.field));

        if (cfg.lr_final_ratio < 1.0 && cfg.iterations > 1) {
            const double frac = static_cast<double>(it) / static_cast<double>(cfg.iterations - 1);
            const double factor = std::pow(cfg.lr_final_ratio, frac);
            for (std::size_t g = 0; g < decayed.size(); ++g) decayed[g]->lr = base_lr[g] * factor;
        }

        const auto& sg = step.scene_grads;
        std::vector<double> g_pos(2 * n), g_scl(2 * n);
        for (std::size_t i = 0; i < n; ++i) {
            g_pos[2 * i] = sg.d_position[i].x();
            g_pos[2 * i + 1] = sg.d_position[i].y();
            g_scl[2 * i] = sg.d_log_scale[i].x();
            g_scl[2 * i + 1] = sg.d_log_scale[i].y();
        }
        check_finite(g_pos, "position gradient");
        check_finite(sg.d_color, "colour gradient");
        adam_step(adam_pos, pos, g_pos);
        adam_step(adam_scl, scl, g_scl);
        adam_step(adam_ang, ang, sg.d_angle);
        adam_step(adam_col, col, sg.d_color);
        adam_step(adam_opa, opa, sg.d_opacity_logit);
        adam_step(adam_ra, result.field.raw_alpha, step.d_raw_alpha);
        adam_step(adam_rb, result.field.raw_beta, step.d_raw_beta);
        for (double& c : col) c = std::clamp(c, 0.0, 1.0);
        write_back();
    }
    result.scene = std::move(scene);
    return result;
}

FitResult fit_confidence(const SplatSet& scene, std::span<const compress::View> views, const TrainConfig& cfg,
                         const raster::RenderSettings& settings, const std::optional<ConfidenceField>& init) {
    cfg.validate();
    settings.validate();
    scene.validate();
    if (views.empty()) throw ContractError("fit_confidence: need at least one view with a target image");
    for (const auto& v : views) {
        if (scene.mode == SceneMode::ThreeD && !v.camera) {
            throw ContractError("fit_confidence: 3D scenes need a camera for every target");
        }
        const auto [w, h] = raster::output_size(scene, v.camera_ptr());
        if (v.target.width != w || v.target.height != h) {
            throw ContractError("fit_confidence: target image size does not match its camera");
        }
    }

    FitResult result;
    result.scene = scene;
    result.field = init ? *init : ConfidenceField::uniform(scene.size());
    result.field.validate(scene.size());

    const std::size_t n = scene.size();
    AdamState adam_ra(n, cfg.lr_confidence), adam_rb(n, cfg.lr_confidence);
    raster::SaliencyTracker tracker(n, cfg.saliency.ema_decay);
    const auto per_step = std::min<std::size_t>(static_cast<std::size_t>(cfg.cameras_per_step), views.size());
    std::vector<const compress::View*> batch(per_step);
    std::size_t cursor = 0;

    for (int it = 0; it < cfg.iterations; ++it) {
        // Round-robin over the camera list.
        for (auto& b : batch) {
            b = &views[cursor];
            cursor = (cursor + 1) % views.size();
        }
        const StepResult step = compute_step(scene, result.field, batch, cfg, settings, tracker,
                                             mix_seed(cfg.seed, static_cast<std::uint64_t>(it)));
        if (it % cfg.snapshot_every == 0) result.history.push_back(snapshot(it, step, result.field));
        adam_step(adam_ra, result.field.raw_alpha, step.d_raw_alpha);
        adam_step(adam_rb, result.field.raw_beta, step.d_raw_beta);
        check_finite(result.field.raw_alpha, "confidence parameter");
        check_finite(result.field.raw_beta, "confidence parameter");
    }
    return result;
}

}  // namespace confsplat::train
