// Acceptance checks. Prints one [PASS]/[FAIL] line per criterion and exits
// nonzero if any fails.

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include "confsplat/betaconf.hpp"
#include "confsplat/compress.hpp"
#include "confsplat/io.hpp"
#include "confsplat/losses.hpp"
#include "confsplat/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

using namespace confsplat;
using namespace testsupport;

namespace {

// Pinned tolerances.
constexpr double kSqrTol = 2e-4;
constexpr int kSqrMinRows = 6;
constexpr double kEntropyAbsTol = 1e-6;
constexpr double kEntropyGradRel = 1e-5;
constexpr double kGradRel = 1e-4;
constexpr double kGradAbs = 1e-6;
constexpr double kConservationTol = 1e-6;
constexpr double kFitPsnrMin = 30.0;
constexpr double kPruneLossMaxDb = 1.0;
constexpr double kPruneFraction = 0.3;
constexpr double kDuplicateGapMin = 0.2;
constexpr double kDuplicateRemovedMin = 0.8;
constexpr double kDuplicatePsnrDropMax = 0.1;
constexpr double kRankingTol = 1e-12;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// 1. Published (count, PSNR, SQR) rows. The scale is taken from the size of the
// scene each method started from: 10^6 for the Flowers and Truck rows, 10^5 for
// the 600k-splat Eiffel baseline.
Outcome sqr_rows() {
    struct Row {
        const char* name;
        std::size_t original;
        std::size_t count;
        double psnr;
        double sqr;
    };
    const Row rows[] = {
        {"flowers/3dgs", 3590000, 3590000, 21.450, 0.1433},
        {"flowers/radsplat", 3590000, 1751775, 21.367, 0.0757},
        {"flowers/minisplat", 3590000, 3384239, 21.382, 0.1366},
        {"flowers/base@100", 4572755, 4572755, 21.383, 0.1761},
        {"flowers/base@50", 4572755, 2227814, 21.383, 0.0943},
        {"flowers/mcmc@100", 1000000, 1000000, 21.592, 0.0442},
        {"flowers/mcmc@95", 1000000, 963860, 21.334, 0.0432},
        {"flowers/mcmc@90", 1000000, 915488, 20.614, 0.0425},
        {"truck/3dgs", 2610000, 2610000, 25.37, 0.0932},
        {"truck/radsplat", 2610000, 1291794, 25.4187, 0.0483},
        {"truck/minisplat", 2610000, 2555598, 25.3142, 0.0916},
        {"truck/base@100", 3563759, 3563759, 25.208, 0.1238},
        {"truck/base@33", 3563759, 1142117, 24.1741, 0.0451},
        {"truck/mcmc@100", 1000000, 1000000, 25.8155, 0.0372},
        {"truck/mcmc@95", 1000000, 950877, 25.6068, 0.0358},
        {"truck/mcmc@90", 1000000, 895876, 24.7306, 0.0349},
        {"eiffel/3dgs", 600000, 600000, 22.877, 0.2077},
    };
    int matched = 0;
    std::string misses;
    for (const auto& r : rows) {
        const double v = compress::sqr(r.count, r.psnr, compress::sqr_scale(r.original));
        if (std::abs(v - r.sqr) <= kSqrTol) {
            ++matched;
        } else {
            misses += fmt(" %s=%.5f", r.name, v);
        }
    }
    const int total = static_cast<int>(std::size(rows));
    return {matched >= kSqrMinRows, fmt("%d/%d rows within %.4f%s", matched, total, kSqrTol, misses.c_str())};
}

// 2. Entropy against quadrature and its gradient against central differences.
Outcome entropy_oracle() {
    const double grid[] = {0.5, 1.0, 2.0, 5.0, 10.0};
    double worst_value = 0.0, worst_grad = 0.0;
    bool ok = true;
    for (double a : grid) {
        for (double b : grid) {
            const double err = std::abs(betaconf::beta_entropy({a, b}) - oracles::beta_entropy_simpson(a, b));
            worst_value = std::max(worst_value, err);
            ok = ok && err <= kEntropyAbsTol;
            const auto g = betaconf::beta_entropy_grad({a, b});
            const double fa = central_diff([&](double x) { return betaconf::beta_entropy({x, b}); }, a, 1e-5);
            const double fb = central_diff([&](double x) { return betaconf::beta_entropy({a, x}); }, b, 1e-5);
            for (auto [an, nu] : {std::pair{g.first, fa}, std::pair{g.second, fb}}) {
                // The gradient vanishes exactly at (1, 1); compare that case absolutely.
                const double rel = std::abs(an - nu) / std::max(std::abs(nu), 1e-4);
                worst_grad = std::max(worst_grad, rel);
                ok = ok && grad_close(an, nu, kEntropyGradRel, 1e-9);
            }
        }
    }
    return {ok, fmt("max |H - simpson| = %.2e, max gradient rel err = %.2e", worst_value, worst_grad)};
}

// 3. Rasterizer gradients in both modes.
Outcome raster_gradients() {
    std::size_t samples = 0, failures = 0;
    std::string first;
    for (bool two_d : {true, false}) {
        const auto problem = make_grad_problem(two_d, 2024, 10, 16);
        const auto report = check_gradients(problem, 1e-6, kGradRel, kGradAbs);
        samples += report.samples.size();
        failures += report.failures();
        if (first.empty()) first = report.first_failure();
    }
    return {failures == 0, fmt("%zu gradient entries, %zu outside tolerance%s%s", samples, failures,
                               first.empty() ? "" : "; first: ", first.c_str())};
}

// 4. Weights plus final transmittance sum to one; c = 1 equals the
// unmodulated render.
Outcome conservation() {
    std::mt19937_64 rng(77);
    const SplatSet scene = random_scene_2d(120, 48, 48, rng);
    const auto field = random_field(120, rng);
    raster::RenderSettings st;
    st.background = {0.1, 0.4, 0.8};
    const auto r = raster::render_scene(scene, nullptr, field.confidences(), st);
    std::uniform_int_distribution<std::size_t> pick(0, 48 * 48 - 1);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const std::size_t p = pick(rng);
        double sum = r.aux.final_transmittance[p];
        for (const auto& rec : r.aux.pixel_records(p)) sum += rec.weight;
        worst = std::max(worst, std::abs(sum - 1.0));
    }

    bool identical = true;
    for (bool two_d : {true, false}) {
        const SplatSet s = two_d ? random_scene_2d(60, 32, 24, rng) : random_scene_3d(60, 2, rng);
        const Camera cam = forward_camera(32, 24);
        const Camera* cp = two_d ? nullptr : &cam;
        const auto proj = raster::project_scene(s, cp, st);
        const Image ref = reference_render(proj, logits_of(s), 32, 24, st);
        identical = identical && raster::render_scene(s, cp, std::vector<double>(60, 1.0), st).image.data == ref.data;
    }
    return {worst <= kConservationTol && identical,
            fmt("max |sum w + T - 1| = %.2e over 1000 pixels; c=1 render %s", worst,
                identical ? "bit-identical" : "differs")};
}

Image synthetic_target(int w, int h) {
    Image img(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double u = (x + 0.5) / w, v = (y + 0.5) / h;
            const double disc = std::hypot(u - 0.3, v - 0.35) < 0.18 ? 1.0 : 0.0;
            const double square = (std::abs(u - 0.7) < 0.15 && std::abs(v - 0.7) < 0.12) ? 1.0 : 0.0;
            const double stripes = 0.5 + 0.5 * std::sin(2.0 * 3.14159265358979 * (3.0 * u + 2.0 * v));
            const double blob = std::exp(-((u - 0.7) * (u - 0.7) + (v - 0.25) * (v - 0.25)) / 0.01);
            img.at(x, y, 0) = std::clamp(0.1 + 0.3 * u + 0.5 * disc + 0.1 * stripes, 0.0, 1.0);
            img.at(x, y, 1) = std::clamp(0.2 + 0.3 * v + 0.4 * square * (1 - disc) + 0.2 * blob, 0.0, 1.0);
            img.at(x, y, 2) = std::clamp(0.5 - 0.2 * u + 0.2 * stripes - 0.3 * square, 0.0, 1.0);
        }
    }
    return img;
}

// Smallest tau that removes at least `fraction` of the splats.
double removal_tau(std::vector<double> c, double fraction) {
    std::sort(c.begin(), c.end());
    const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(c.size())));
    return std::nextafter(c[k - 1], std::numeric_limits<double>::infinity());
}

// 5. Mode A fit and pruning.
Outcome fit_and_prune() {
    const Image target = synthetic_target(64, 64);
    raster::RenderSettings st;
    train::TrainConfig cfg;
    cfg.iterations = 2000;
    cfg.snapshot_every = 100;
    cfg.lr_final_ratio = 0.1;
    cfg.weights.lambda_sparse = 0.2;
    cfg.weights.lambda_saliency = 0.5;
    const auto fit = train::fit_2d(target, 500, cfg, st);

    const std::vector<compress::View> views{{std::nullopt, target}};
    const double full = compress::evaluate(fit.scene, fit.field, views, st).psnr;
    const double tau = removal_tau(fit.field.confidences(), kPruneFraction);
    const auto pruned = compress::prune(fit.scene, fit.field, tau);
    const double after = compress::evaluate(pruned.scene, pruned.field, views, st).psnr;
    const double removed = 1.0 - static_cast<double>(pruned.scene.size()) / 500.0;
    return {full >= kFitPsnrMin && removed >= kPruneFraction && full - after <= kPruneLossMaxDb,
            fmt("PSNR %.2f dB at tau=0; tau*=%.4f removes %.1f%%, PSNR %.2f dB (loss %.3f dB)", full, tau,
                100.0 * removed, after, full - after)};
}

// 6. Mode B on a scene whose second half duplicates the first half exactly.
// Every splat lies on one depth plane, so depth ties put each duplicate behind
// the whole front layer. The plane extends past every view so no duplicate is
// exposed at its border.
Outcome duplicate_discovery() {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SplatSet scene;
    scene.mode = SceneMode::ThreeD;
    scene.color_kind = ColorKind::Sh;
    scene.sh_degree = 0;
    const int grid = 12;
    const double z = 4.0, extent = 2.4;
    for (int gy = 0; gy < grid; ++gy) {
        for (int gx = 0; gx < grid; ++gx) {
            Splat s;
            s.position = {(gx + 0.5) / grid * extent - 0.5 * extent, (gy + 0.5) / grid * extent - 0.5 * extent, z};
            const double sigma = 1.2 * extent / grid;
            s.log_scale = {std::log(sigma), std::log(sigma), std::log(0.02)};
            s.rotation = Eigen::Vector4d(1.0, 0.0, 0.0, 0.0);
            s.color = {(u(rng) - 0.5) / raster::kShC0, (u(rng) - 0.5) / raster::kShC0, (u(rng) - 0.5) / raster::kShC0};
            s.opacity_logit = 8.0;
            scene.splats.push_back(s);
        }
    }
    const std::size_t half = scene.size();
    for (std::size_t i = 0; i < half; ++i) scene.splats.push_back(scene.splats[i]);

    std::vector<Camera> cams;
    const double shifts[][2] = {{0.0, 0.0}, {0.15, 0.0}, {-0.15, 0.1}, {0.05, -0.15}};
    for (int k = 0; k < 4; ++k) {
        Camera c = forward_camera(40, 40, k);
        c.fx = c.fy = 100.0;
        c.translation = {shifts[k][0], shifts[k][1], 0.0};
        cams.push_back(c);
    }
    raster::RenderSettings st;
    const auto views = compress::self_supervised_views(scene, cams, st);

    train::TrainConfig cfg;
    cfg.iterations = 600;
    cfg.snapshot_every = 100;
    // Half the splats are duplicates, so the pools split at the median.
    cfg.saliency.quantile = 0.5;
    cfg.weights.lambda_saliency = 0.1;
    const auto fit = train::fit_confidence(scene, views, cfg, st);
    const auto c = fit.field.confidences();

    double visible = 0.0, dup = 0.0;
    std::size_t removed = 0;
    for (std::size_t i = 0; i < half; ++i) {
        visible += c[i];
        dup += c[half + i];
        removed += c[half + i] < 0.5 ? 1 : 0;
    }
    visible /= static_cast<double>(half);
    dup /= static_cast<double>(half);
    const double removed_frac = static_cast<double>(removed) / static_cast<double>(half);

    const double full = compress::evaluate(fit.scene, fit.field, views, st).psnr;
    const auto pruned = compress::prune(fit.scene, fit.field, 0.5);
    const double after = compress::evaluate(pruned.scene, pruned.field, views, st).psnr;
    const double drop = full - after;
    return {visible - dup >= kDuplicateGapMin && removed_frac >= kDuplicateRemovedMin && drop <= kDuplicatePsnrDropMax,
            fmt("mean c visible %.3f, duplicates %.3f; tau=0.5 removes %.1f%% of duplicates; PSNR %.2f -> %.2f dB",
                visible, dup, 100.0 * removed_frac, full, after)};
}

// 7. Pruning algebra on random fields.
Outcome pruning_algebra() {
    std::mt19937_64 rng(5150);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    raster::RenderSettings st;
    int bad_nesting = 0, bad_monotone = 0, bad_acs = 0, bad_identity = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 10 + trial % 40;
        const SplatSet scene = random_scene_2d(n, 20, 16, rng);
        const auto field = random_field(n, rng, 4.0);
        const auto conf = field.confidences();

        std::vector<double> taus(12);
        for (double& t : taus) t = u(rng);
        taus.push_back(0.0);
        taus.push_back(1.0);
        std::sort(taus.begin(), taus.end());
        std::vector<std::size_t> prev;
        std::size_t prev_kept = n + 1;
        for (std::size_t k = 0; k < taus.size(); ++k) {
            const auto kept = compress::prune(scene, field, taus[k]).kept_indices;
            if (k > 0 && !std::includes(prev.begin(), prev.end(), kept.begin(), kept.end())) ++bad_nesting;
            if (kept.size() > prev_kept) ++bad_monotone;
            prev = kept;
            prev_kept = kept.size();
        }

        if (compress::acs(field) != losses::sparsity_loss(conf).value) ++bad_acs;

        const auto p0 = compress::prune(scene, field, 0.0);
        const auto a = raster::render_scene(scene, nullptr, conf, st).image;
        const auto b = raster::render_scene(p0.scene, nullptr, p0.field.confidences(), st).image;
        if (a.data != b.data) ++bad_identity;
    }
    return {bad_nesting + bad_monotone + bad_acs + bad_identity == 0,
            fmt("100 fields: nesting violations %d, count increases %d, acs mismatches %d, prune(0) render diffs %d",
                bad_nesting, bad_monotone, bad_acs, bad_identity)};
}

double f32(double v) { return static_cast<double>(static_cast<float>(v)); }

// 8. PLY round trip and loading a file without the confidence properties.
Outcome ply_round_trip() {
    std::mt19937_64 rng(8);
    SplatSet scene = random_scene_3d(1000, 3, rng);
    for (auto& sp : scene.splats) {
        for (int a = 0; a < 3; ++a) {
            sp.position[a] = f32(sp.position[a]);
            sp.log_scale[a] = f32(sp.log_scale[a]);
        }
        for (int a = 0; a < 4; ++a) sp.rotation[a] = f32(sp.rotation[a]);
        for (double& c : sp.color) c = f32(c);
        sp.opacity_logit = f32(sp.opacity_logit);
    }
    auto field = random_field(1000, rng, 4.0);
    for (auto& v : field.raw_alpha) v = f32(v);
    for (auto& v : field.raw_beta) v = f32(v);

    const auto back = io::parse_ply(io::serialize_ply(scene, &field));
    std::size_t mismatches = back.scene.size() == scene.size() ? 0 : 1;
    if (mismatches == 0) {
        for (std::size_t i = 0; i < scene.size(); ++i) {
            const auto& x = scene.splats[i];
            const auto& y = back.scene.splats[i];
            const bool same = x.position == y.position && x.log_scale == y.log_scale && x.rotation == y.rotation &&
                              x.color == y.color && x.opacity_logit == y.opacity_logit;
            mismatches += same ? 0 : 1;
        }
    }
    const bool field_ok =
        back.field && back.field->raw_alpha == field.raw_alpha && back.field->raw_beta == field.raw_beta;

    bool reference_ok = false;
    std::string reference_msg;
    try {
        const auto ref = io::load_ply(data_path("reference_sh3.ply"));
        reference_ok = !ref.field && ref.scene.size() == 3 && ref.scene.sh_degree == 3;
        reference_msg = fmt("reference file: %zu splats, degree %d, %s", ref.scene.size(), ref.scene.sh_degree,
                            ref.field ? "has confidence" : "no confidence");
    } catch (const std::exception& e) {
        reference_msg = std::string("reference file failed: ") + e.what();
    }
    return {mismatches == 0 && field_ok && reference_ok,
            fmt("1000 splats: %zu mismatches, confidence %s; %s", mismatches, field_ok ? "exact" : "differs",
                reference_msg.c_str())};
}

// 9. Ranking loss value and gradient per pair.
Outcome ranking_contract() {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    int bad_grad = 0;
    for (int k = 0; k < 1000; ++k) {
        const std::vector<double> c{u(rng), u(rng)};
        const std::vector<losses::SplatPair> pair{{0, 1}};
        const auto l = losses::saliency_ranking_loss(pair, c);
        worst = std::max(worst, std::abs(l.value - (1.0 - (c[0] - c[1]))));
        // 1 + c_j - c_i > 0 always holds for c in [0, 1) so the hinge is active.
        if (l.grad[0] != -1.0 || l.grad[1] != 1.0) ++bad_grad;
    }

    // Several pairs: each active pair contributes -1/K and +1/K.
    const std::size_t n = 200;
    std::vector<double> c(n);
    for (double& v : c) v = u(rng);
    std::vector<losses::SplatPair> pairs;
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    while (pairs.size() < 1000) {
        const std::size_t i = pick(rng), j = pick(rng);
        if (i != j) pairs.emplace_back(i, j);
    }
    const auto l = losses::saliency_ranking_loss(pairs, c);
    std::vector<double> expected(n, 0.0);
    double value = 0.0;
    const double k = static_cast<double>(pairs.size());
    for (auto [i, j] : pairs) {
        const double h = 1.0 + c[j] - c[i];
        if (h > 0.0) {
            value += h;
            expected[i] -= 1.0 / k;
            expected[j] += 1.0 / k;
        }
    }
    value /= k;
    double worst_grad = 0.0;
    for (std::size_t i = 0; i < n; ++i) worst_grad = std::max(worst_grad, std::abs(l.grad[i] - expected[i]));
    const bool ok = worst <= kRankingTol && bad_grad == 0 && std::abs(l.value - value) <= kRankingTol &&
                    worst_grad <= kRankingTol;
    return {ok, fmt("1000 pairs: max value err %.1e, sign errors %d; batch of 1000: value err %.1e, grad err %.1e",
                    worst, bad_grad, std::abs(l.value - value), worst_grad)};
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
    };
    const Criterion criteria[] = {
        {"sqr reproduction", sqr_rows},
        {"beta entropy oracle", entropy_oracle},
        {"rasterizer gradients", raster_gradients},
        {"compositing conservation", conservation},
        {"mode A fit and prune", fit_and_prune},
        {"duplicate discovery", duplicate_discovery},
        {"pruning algebra", pruning_algebra},
        {"ply round trip", ply_round_trip},
        {"ranking loss contract", ranking_contract},
    };
    int failed = 0;
    int index = 1;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("[%s] %d %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", index, c.name, o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
        ++index;
    }
    return failed == 0 ? 0 : 1;
}
