#include "support.hpp"

#include "confsplat/compress.hpp"
#include "confsplat/losses.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

using namespace confsplat;
using namespace confsplat::losses;
using testsupport::central_diff;
using testsupport::grad_close;

TEST_CASE("l1 loss values and subgradient") {
    const Image z(4, 4, 0.0), o(4, 4, 1.0);
    CHECK(l1_loss(z, z).value == 0.0);
    CHECK(l1_loss(z, o).value == 1.0);
    for (double g : l1_loss(z, z).grad.data) CHECK(g == 0.0);
    CHECK_THROWS_AS(l1_loss(Image(4, 4), Image(4, 5)), ContractError);

    std::mt19937_64 rng(1);
    const Image a = testsupport::random_image(8, 8, rng);
    const Image b = testsupport::random_image(8, 8, rng);
    const auto l = l1_loss(a, b);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double fd = central_diff(
            [&](double v) {
                Image x = a;
                x.data[i] = v;
                return l1_loss(x, b).value;
            },
            a.data[i]);
        CHECK(std::abs(l.grad.data[i] - fd) <= 1e-6);
    }
}

TEST_CASE("ssim closed forms and gradient") {
    const Image z(12, 12, 0.0), o(12, 12, 1.0);
    CHECK(ssim(o, o).value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ssim(z, o).value == doctest::Approx(1e-4 / (1.0 + 1e-4)).epsilon(1e-9));
    CHECK_THROWS_AS(ssim(Image(10, 12), Image(10, 12)), ContractError);

    std::mt19937_64 rng(2);
    const Image a = testsupport::random_image(16, 16, rng);
    const Image b = testsupport::random_image(16, 16, rng);
    const auto s = ssim(a, b);
    std::size_t bad = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double fd = central_diff(
            [&](double v) {
                Image x = a;
                x.data[i] = v;
                return ssim(x, b).value;
            },
            a.data[i]);
        bad += grad_close(s.grad.data[i], fd, 1e-4, 1e-9) ? 0 : 1;
    }
    CHECK(bad == 0);
}

TEST_CASE("reconstruction mix") {
    std::mt19937_64 rng(3);
    const Image a = testsupport::random_image(12, 12, rng);
    const Image b = testsupport::random_image(12, 12, rng);
    CHECK(reconstruction_loss(a, a, 0.2).value == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(reconstruction_loss(a, b, 0.0).value == l1_loss(a, b).value);
    const Image z(12, 12, 0.0), o(12, 12, 1.0);
    CHECK(reconstruction_loss(z, o, 1.0).value == doctest::Approx(1.0 - 1e-4 / (1.0 + 1e-4)).epsilon(1e-9));
    const double mixed = reconstruction_loss(a, b, 0.2).value;
    CHECK(mixed == doctest::Approx(0.8 * l1_loss(a, b).value + 0.2 * (1.0 - ssim(a, b).value)).epsilon(1e-12));
    CHECK_THROWS_AS(reconstruction_loss(a, b, 1.5), ContractError);
}

TEST_CASE("sparsity loss is the mean and equals acs") {
    const std::vector<double> c{0.2, 0.4, 0.6, 0.8};
    const auto s = sparsity_loss(c);
    CHECK(s.value == doctest::Approx(0.5).epsilon(1e-15));
    for (double g : s.grad) CHECK(g == 0.25);
    CHECK(sparsity_loss(std::vector<double>(7, 1.0)).value == 1.0);
    CHECK_THROWS_AS(sparsity_loss(std::vector<double>{}), ContractError);

    std::mt19937_64 rng(4);
    const auto field = testsupport::random_field(100, rng);
    const auto conf = field.confidences();
    CHECK(sparsity_loss(conf).value == compress::acs(field));
    auto shuffled = conf;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(sparsity_loss(shuffled).value == doctest::Approx(sparsity_loss(conf).value).epsilon(1e-14));
}

TEST_CASE("entropy loss values and gradient") {
    CHECK(std::abs(entropy_loss(ConfidenceField::uniform(5, betaconf::inverse_softplus(1.0 - kConfidenceEpsilon))).value) <=
          1e-14);
    const double ra = betaconf::inverse_softplus(5.0 - kConfidenceEpsilon);
    const double rb = betaconf::inverse_softplus(1.0 - kConfidenceEpsilon);
    ConfidenceField f;
    f.raw_alpha.assign(3, ra);
    f.raw_beta.assign(3, rb);
    CHECK(entropy_loss(f).value == doctest::Approx(0.809438).epsilon(1e-6));

    // The Beta(1,1) start is the minimum of -H along alpha = beta.
    const double at_one = -betaconf::beta_entropy({1.0, 1.0});
    for (double k = 0.05; k < 20.0; k *= 1.3) CHECK(-betaconf::beta_entropy({k, k}) >= at_one);

    std::mt19937_64 rng(5);
    const auto field = testsupport::random_field(10, rng);
    const auto e = entropy_loss(field);
    for (std::size_t i = 0; i < field.size(); ++i) {
        const double fa = central_diff(
            [&](double v) {
                auto g = field;
                g.raw_alpha[i] = v;
                return entropy_loss(g).value;
            },
            field.raw_alpha[i]);
        const double fb = central_diff(
            [&](double v) {
                auto g = field;
                g.raw_beta[i] = v;
                return entropy_loss(g).value;
            },
            field.raw_beta[i]);
        CHECK(grad_close(e.d_raw_alpha[i], fa, 1e-5, 1e-10));
        CHECK(grad_close(e.d_raw_beta[i], fb, 1e-5, 1e-10));
    }
    CHECK_THROWS_AS(entropy_loss(ConfidenceField{}), ContractError);
}

TEST_CASE("saliency pair sampling") {
    SaliencyConfig cfg;
    cfg.quantile = 0.5;
    cfg.pairs_per_step = 2;
    const std::vector<double> s{9, 8, 1, 0};
    const auto p = sample_saliency_pairs(s, cfg, 7);
    CHECK(p.pairs.size() == 2);
    CHECK_FALSE(p.degenerate);
    for (const auto& [i, j] : p.pairs) {
        CHECK(i <= 1);
        CHECK(j >= 2);
    }

    const auto flat = sample_saliency_pairs(std::vector<double>(6, 3.0), cfg, 7);
    CHECK(flat.pairs.empty());
    CHECK(flat.degenerate);
    CHECK_THROWS_AS(sample_saliency_pairs(std::vector<double>{1.0}, cfg, 7), ContractError);

    std::mt19937_64 rng(6);
    std::vector<double> sal(200);
    for (double& v : sal) v = std::uniform_real_distribution<double>(0.0, 5.0)(rng);
    cfg.quantile = 0.25;
    cfg.pairs_per_step = 64;
    const auto a = sample_saliency_pairs(sal, cfg, 99);
    const auto b = sample_saliency_pairs(sal, cfg, 99);
    CHECK(a.pairs == b.pairs);
    CHECK(a.pairs.size() == 64);
    std::vector<double> sorted = sal;
    std::sort(sorted.begin(), sorted.end());
    // Pools hold floor(0.25 * 200) = 50 splats each.
    for (const auto& [i, j] : a.pairs) {
        CHECK(sal[i] >= sorted[150]);
        CHECK(sal[j] <= sorted[49]);
    }
    CHECK(sample_saliency_pairs(sal, cfg, 100).pairs != a.pairs);

    // Ties between the pools are discarded.
    const std::vector<double> tied{2, 2, 2, 1};
    cfg.quantile = 0.5;
    cfg.pairs_per_step = 8;
    for (const auto& [i, j] : sample_saliency_pairs(tied, cfg, 3).pairs) CHECK(tied[i] != tied[j]);
}

TEST_CASE("saliency ranking loss") {
    const std::vector<SplatPair> one{{0, 1}};
    CHECK(saliency_ranking_loss(one, std::vector<double>{0.9, 0.1}).value == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(saliency_ranking_loss(one, std::vector<double>{0.5, 0.5}).value == 1.0);
    const auto edge = saliency_ranking_loss(one, std::vector<double>{1.0, 0.0});
    CHECK(edge.value == 0.0);
    CHECK(edge.grad[0] == 0.0);
    CHECK(saliency_ranking_loss({}, std::vector<double>{0.3}).value == 0.0);
    CHECK_THROWS_AS(saliency_ranking_loss(std::vector<SplatPair>{{0, 5}}, std::vector<double>{0.1, 0.2}), ContractError);

    const std::vector<SplatPair> two{{0, 1}, {2, 1}};
    const auto g = saliency_ranking_loss(two, std::vector<double>{0.7, 0.2, 0.4});
    CHECK(g.value == doctest::Approx((0.5 + 0.8) / 2.0).epsilon(1e-14));
    CHECK(g.grad[0] == -0.5);
    CHECK(g.grad[1] == 1.0);
    CHECK(g.grad[2] == -0.5);

    double prev = 2.0;
    for (double gap = -0.9; gap < 0.95; gap += 0.1) {
        const double ci = 0.5 + gap / 2.0, cj = 0.5 - gap / 2.0;
        const double v = saliency_ranking_loss(one, std::vector<double>{ci, cj}).value;
        CHECK(v > 0.0);
        CHECK(v < 2.0);
        CHECK(v == doctest::Approx(1.0 - (ci - cj)).epsilon(1e-12));
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("total loss weighting") {
    LossWeights w;
    CHECK(total_loss({}, w).total == 0.0);
    LossWeights zero{0.0, 0.0, 0.0, 0.2};
    CHECK(total_loss({1.0, 3.0, 4.0, 5.0}, zero).total == 1.0);
    const auto b = total_loss({0.5, 0.5, -0.1, 1.0}, w);
    CHECK(b.total == doctest::Approx(0.5149).epsilon(1e-12));
    CHECK(std::abs(b.total - (b.recon + b.weighted_sparse + b.weighted_entropy + b.weighted_saliency)) <= 1e-9);
    CHECK(b.weighted_entropy == doctest::Approx(-1e-4).epsilon(1e-12));
    LossWeights neg;
    neg.lambda_entropy = -1.0;
    CHECK_THROWS_AS(total_loss({}, neg), ContractError);
}

TEST_CASE("total loss gradient with respect to raw confidence parameters") {
    std::mt19937_64 rng(8);
    const int size = 16;
    const auto scene = testsupport::random_scene_2d(20, size, size, rng);
    const auto field = testsupport::random_field(20, rng, 1.5);
    const Image target = testsupport::random_image(size, size, rng);
    raster::RenderSettings st;
    const LossWeights w{0.3, 0.2, 0.4, 0.2};
    const std::vector<SplatPair> pairs{{0, 3}, {5, 2}, {7, 11}, {19, 4}};
    // Pure L1 has kinks; keep the reconstruction term smooth via the SSIM part only.
    const LossWeights wr{w.lambda_sparse, w.lambda_entropy, w.lambda_saliency, 1.0};

    auto total = [&](const ConfidenceField& f) {
        const auto conf = f.confidences();
        const auto r = raster::render_scene(scene, nullptr, conf, st);
        LossParts parts;
        parts.recon = reconstruction_loss(r.image, target, wr.recon_ssim_mix).value;
        parts.sparse = sparsity_loss(conf).value;
        parts.entropy = entropy_loss(f).value;
        parts.saliency = saliency_ranking_loss(pairs, conf).value;
        return total_loss(parts, wr).total;
    };

    const auto conf = field.confidences();
    const auto fwd = raster::render_scene(scene, nullptr, conf, st);
    const auto rec = reconstruction_loss(fwd.image, target, wr.recon_ssim_mix);
    const auto rg = raster::chain_to_scene(scene, fwd.aux, raster::render_backward(fwd.aux, rec.grad));
    const auto sp = sparsity_loss(conf);
    const auto en = entropy_loss(field);
    const auto sa = saliency_ranking_loss(pairs, conf);

    for (std::size_t i = 0; i < field.size(); ++i) {
        const auto cv = betaconf::confidence(field.raw_alpha[i], field.raw_beta[i]);
        const double dc = rg.d_confidence[i] + wr.lambda_sparse * sp.grad[i] + wr.lambda_saliency * sa.grad[i];
        const double ga = dc * cv.d_raw_alpha + wr.lambda_entropy * en.d_raw_alpha[i];
        const double gb = dc * cv.d_raw_beta + wr.lambda_entropy * en.d_raw_beta[i];
        const double fa = central_diff(
            [&](double v) {
                auto g = field;
                g.raw_alpha[i] = v;
                return total(g);
            },
            field.raw_alpha[i]);
        const double fb = central_diff(
            [&](double v) {
                auto g = field;
                g.raw_beta[i] = v;
                return total(g);
            },
            field.raw_beta[i]);
        INFO("splat " << i);
        CHECK(grad_close(ga, fa, 1e-4, 1e-8));
        CHECK(grad_close(gb, fb, 1e-4, 1e-8));
    }
}
