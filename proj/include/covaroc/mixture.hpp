#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "covaroc/rng.hpp"

namespace covaroc {

// Conditional mixture of normals: weights and locations are linear in the
// basis features (trailing constant included), scales are per component and
// covariate-independent.
struct MixtureParams {
    Eigen::MatrixXd W_weights;    // H x F logit coefficients
    Eigen::MatrixXd W_locations;  // H x F location coefficients
    Eigen::VectorXd log_sigmas;   // H

    Eigen::Index components() const { return W_weights.rows(); }
    Eigen::Index features() const { return W_weights.cols(); }
    void validate() const;  // shape agreement and finiteness
};

// Independent normal priors: zero-mean with std coefficient_scale on every
// coefficient, N(log_sigma_loc, log_sigma_scale) on each log sigma.
struct PriorSpec {
    double coefficient_scale = 2.5;
    double log_sigma_loc = 0.0;
    double log_sigma_scale = 1.0;
};

// Gradient of a scalar objective with respect to every parameter entry.
struct MixtureGrad {
    Eigen::MatrixXd W_weights;
    Eigen::MatrixXd W_locations;
    Eigen::VectorXd log_sigmas;

    static MixtureGrad zeros(Eigen::Index components, Eigen::Index features);
};

Eigen::VectorXd weights_at(const MixtureParams& p, const Eigen::VectorXd& phi);
Eigen::VectorXd locations_at(const MixtureParams& p, const Eigen::VectorXd& phi);

// log sum_h pi_h(x) N(y | mu_h(x), sigma_h), clamped below at -745. Each
// clamp increments the process-wide underflow counter.
double log_density(const MixtureParams& p, double y, const Eigen::VectorXd& phi);

// Analytic gradient of the unclamped log density. Also returns the value.
double log_density_grad(const MixtureParams& p, double y,
                        const Eigen::VectorXd& phi, MixtureGrad& grad);

std::vector<double> sample(const MixtureParams& p, const Eigen::VectorXd& phi,
                           std::size_t n, Rng& rng);

// sum_h pi_h Phi((y - mu_h) / sigma_h)
double cdf(const MixtureParams& p, const Eigen::VectorXd& phi, double y);

// Batched likelihood over rows of phi (n x F) with responses y (n). The sum
// and its gradient match per-record accumulation up to floating reassociation.
double log_density_sum(const MixtureParams& p, const Eigen::VectorXd& y,
                       const Eigen::MatrixXd& phi);
double log_density_sum_grad(const MixtureParams& p, const Eigen::VectorXd& y,
                            const Eigen::MatrixXd& phi, MixtureGrad& grad);

// Unconstrained parameter vector layout: W_weights row-major, then
// W_locations row-major, then log_sigmas.
Eigen::Index flat_size(Eigen::Index components, Eigen::Index features);
Eigen::VectorXd flatten(const MixtureParams& p);
MixtureParams unflatten(const Eigen::VectorXd& theta, Eigen::Index components,
                        Eigen::Index features);
Eigen::VectorXd flatten_grad(const MixtureGrad& g);

// Process-wide count of log-density underflow clamps (thread-safe).
std::uint64_t underflow_count();
void reset_underflow_count();

}  // namespace covaroc
