#include "confsplat/betaconf.hpp"

#include "confsplat/core.hpp"

#include <cmath>
#include <numbers>

namespace confsplat::betaconf {

namespace {

// Shift target for the asymptotic series; at x >= 10 the truncated series
// below is accurate to well under 1e-15 relative.
constexpr double kAsymptoticThreshold = 10.0;

void require_positive(double x, const char* name) {
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw ContractError(std::string(name) + ": argument must be positive and finite");
    }
}

double stirling_log_gamma(double x) {
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    const double series =
        inv * (1.0 / 12.0 +
               inv2 * (-1.0 / 360.0 +
                       inv2 * (1.0 / 1260.0 +
                               inv2 * (-1.0 / 1680.0 +
                                       inv2 * (1.0 / 1188.0 + inv2 * (-691.0 / 360360.0 + inv2 * (1.0 / 156.0)))))));
    return (x - 0.5) * std::log(x) - x + 0.5 * std::log(2.0 * std::numbers::pi) + series;
}

}  // namespace

double softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double inverse_softplus(double y) {
    require_positive(y, "inverse_softplus");
    if (y > 30.0) return y;
    return std::log(std::expm1(y));
}

double log_gamma(double x) {
    require_positive(x, "log_gamma");
    if (x >= kAsymptoticThreshold) return stirling_log_gamma(x);
    // ln Gamma(x) = ln Gamma(x + n) - ln(x (x+1) ... (x+n-1))
    double product = 1.0;
    while (x < kAsymptoticThreshold) {
        product *= x;
        x += 1.0;
    }
    return stirling_log_gamma(x) - std::log(product);
}

double digamma(double x) {
    require_positive(x, "digamma");
    double shift = 0.0;
    while (x < kAsymptoticThreshold) {
        shift -= 1.0 / x;
        x += 1.0;
    }
    const double inv2 = 1.0 / (x * x);
    const double series =
        inv2 * (1.0 / 12.0 -
                inv2 * (1.0 / 120.0 -
                        inv2 * (1.0 / 252.0 -
                                inv2 * (1.0 / 240.0 -
                                        inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0 - inv2 * (1.0 / 12.0)))))));
    return shift + std::log(x) - 0.5 / x - series;
}

double trigamma(double x) {
    require_positive(x, "trigamma");
    double shift = 0.0;
    while (x < kAsymptoticThreshold) {
        shift += 1.0 / (x * x);
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    const double series =
        inv * (1.0 + inv * (0.5 + inv * (1.0 / 6.0 -
                                         inv2 * (1.0 / 30.0 -
                                                 inv2 * (1.0 / 42.0 -
                                                         inv2 * (1.0 / 30.0 -
                                                                 inv2 * (5.0 / 66.0 -
                                                                         inv2 * (691.0 / 2730.0 - inv2 * (7.0 / 6.0)))))))));
    return shift + series;
}

BetaParams activate(double raw_alpha, double raw_beta) {
    return {softplus(raw_alpha) + kConfidenceEpsilon, softplus(raw_beta) + kConfidenceEpsilon};
}

ConfidenceValue confidence(double raw_alpha, double raw_beta) {
    const BetaParams p = activate(raw_alpha, raw_beta);
    const double sum = p.alpha + p.beta;
    const double sum2 = sum * sum;
    return {
        p.alpha / sum,
        sigmoid(raw_alpha) * p.beta / sum2,
        -sigmoid(raw_beta) * p.alpha / sum2,
    };
}

double beta_entropy(BetaParams p) {
    const double a = p.alpha;
    const double b = p.beta;
    const double log_beta_fn = log_gamma(a) + log_gamma(b) - log_gamma(a + b);
    // Summing the per-argument terms first keeps H(a, b) == H(b, a) bit for bit.
    const double own = (a - 1.0) * digamma(a) + (b - 1.0) * digamma(b);
    return log_beta_fn - own + (a + b - 2.0) * digamma(a + b);
}

std::pair<double, double> beta_entropy_grad(BetaParams p) {
    const double a = p.alpha;
    const double b = p.beta;
    const double shared = (a + b - 2.0) * trigamma(a + b);
    return {-(a - 1.0) * trigamma(a) + shared, -(b - 1.0) * trigamma(b) + shared};
}

GumbelValue gumbel_confidence_variant(double confidence, double noise, double temperature, GumbelMode mode) {
    if (!(temperature > 0.0)) {
        throw ContractError("gumbel_confidence_variant: temperature must be positive");
    }
    if (mode == GumbelMode::Multiplicative) {
        const double scale = noise / temperature;
        const double s = sigmoid(confidence * scale);
        return {s, s * (1.0 - s) * scale};
    }
    const double s = sigmoid(confidence + noise / temperature);
    return {s, s * (1.0 - s)};
}

GumbelValue gumbel_confidence_variant(double raw_alpha, double raw_beta, double noise, double temperature,
                                      GumbelMode mode) {
    return gumbel_confidence_variant(confidence(raw_alpha, raw_beta).value, noise, temperature, mode);
}

double gumbel_from_uniform(double u) {
    if (!(u > 0.0 && u < 1.0)) {
        throw ContractError("gumbel_from_uniform: u must lie in (0, 1)");
    }
    return -std::log(-std::log(u));
}

}  // namespace confsplat::betaconf
