#pragma once

#include <utility>

namespace confsplat::betaconf {

/// Activated Beta parameters (post-softplus, post-epsilon).
struct BetaParams {
    double alpha = 1.0;
    double beta = 1.0;
};

/// ln(1 + e^x) without overflow.
double softplus(double x);
/// d softplus / dx, the logistic sigmoid.
double sigmoid(double x);
/// Inverse of softplus for y > 0.
double inverse_softplus(double y);

/// ln Gamma(x) for x > 0.
double log_gamma(double x);
double digamma(double x);
double trigamma(double x);

/// softplus(raw) + epsilon.
BetaParams activate(double raw_alpha, double raw_beta);

struct ConfidenceValue {
    double value = 0.5;
    double d_raw_alpha = 0.0;
    double d_raw_beta = 0.0;
};

/// Expected value alpha / (alpha + beta) of the activated Beta and its
/// derivatives with respect to the raw parameters.
ConfidenceValue confidence(double raw_alpha, double raw_beta);

/// Differential entropy of Beta(alpha, beta).
double beta_entropy(BetaParams p);

/// (dH/dalpha, dH/dbeta), with respect to the activated parameters.
std::pair<double, double> beta_entropy_grad(BetaParams p);

enum class GumbelMode { Multiplicative, Additive };

struct GumbelValue {
    double value = 0.5;
    // Derivative with respect to the plain confidence c.
    double d_confidence = 0.0;
};

/// Gumbel-perturbed confidence: sigmoid(c * g / T) or sigmoid(c + g / T).
/// `noise` is a Gumbel sample supplied by the caller.
GumbelValue gumbel_confidence_variant(double confidence, double noise, double temperature, GumbelMode mode);
GumbelValue gumbel_confidence_variant(double raw_alpha, double raw_beta, double noise, double temperature,
                                      GumbelMode mode);

/// -ln(-ln u) for u in (0, 1).
double gumbel_from_uniform(double u);

}  // namespace confsplat::betaconf
