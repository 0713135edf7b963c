#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "covaroc/basis.hpp"
#include "covaroc/dataset.hpp"
#include "covaroc/mixture.hpp"
#include "covaroc/rng.hpp"

namespace covaroc {

struct HmcConfig {
    double step_size = 0.1;  // initial; dual averaging adapts during warmup
    int leapfrog_steps = 32;
    int warmup = 500;
    double target_accept = 0.8;
};

struct SviConfig {
    int iterations = 10000;
    int minibatch_size = 1024;
    double learning_rate = 1e-2;  // Adam base rate, cosine-decayed to 0
    int posterior_samples = 0;    // 0 -> FitConfig.draws
};

enum class FitMethod { Hmc, Svi };
FitMethod fit_method_from_name(const std::string& name);
std::string fit_method_name(FitMethod method);

struct FitConfig {
    FitMethod method = FitMethod::Svi;
    int draws = 100;
    int components = 4;
    HmcConfig hmc;
    SviConfig svi;
    std::uint64_t seed = 0;

    void validate() const;
    int posterior_draws() const {
        return svi.posterior_samples > 0 ? svi.posterior_samples : draws;
    }
};

struct FitDiagnostics {
    std::string method;
    double acceptance_rate = 0.0;  // HMC
    std::size_t divergences = 0;   // HMC
    double final_elbo = 0.0;       // SVI, mean over the last 5% of the trace
    bool divergence_warning = false;
    bool convergence_warning = false;
    std::vector<std::string> warnings;
};

struct FitReport {
    std::vector<double> trace;  // log posterior per transition / ELBO per iteration
    double wall_seconds = 0.0;
    std::uint64_t seed = 0;
    FitConfig config;
};

// Everything needed to map native-unit queries into one fitted model.
struct ModelNormalization {
    Affine score;
    std::vector<std::string> covariate_names;  // this stream's covariate subset
    std::vector<Affine> covariates;
    std::vector<Range> native_range;  // native-unit data range per covariate
};

struct Posterior {
    std::vector<MixtureParams> draws;
    BasisSet basis;
    PriorSpec prior;
    ModelNormalization normalization;
    FitDiagnostics diagnostics;

    Eigen::Index components() const {
        return draws.empty() ? 0 : draws.front().components();
    }
};

// Prepared regression inputs: normalized scores and basis features per record.
struct FitData {
    Eigen::VectorXd y;
    Eigen::MatrixXd phi;  // n x basis.num_features()
};

FitData prepare_fit_data(const PairDataset& ds, bool match_stream,
                         const std::vector<std::string>& covariate_names,
                         const BasisSet& basis);

double prior_log_density(const MixtureParams& p, const PriorSpec& prior);

// scale_factor * sum log_density + log prior (proper normal densities).
double log_posterior(const MixtureParams& p, const PriorSpec& prior,
                     const Eigen::VectorXd& y, const Eigen::MatrixXd& phi,
                     double scale_factor);
double log_posterior_grad(const MixtureParams& p, const PriorSpec& prior,
                          const Eigen::VectorXd& y, const Eigen::MatrixXd& phi,
                          double scale_factor, MixtureGrad& grad);

// Differentiable target over an unconstrained parameter vector. The callback
// returns log density and fills the gradient.
using TargetFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct LeapfrogResult {
    bool finite = false;  // false: trajectory hit a non-finite value part-way
    double logp = 0.0;    // log target at the endpoint (valid when finite)
};

// One leapfrog trajectory integrated in place: q, p, grad enter as the
// current position, momentum, and gradient at q, and exit at the trajectory
// endpoint. logp is the target value at the entering q.
LeapfrogResult leapfrog(const TargetFn& target, Eigen::VectorXd& q,
                        Eigen::VectorXd& p, Eigen::VectorXd& grad, double logp,
                        double step_size, int steps);

struct HmcResult {
    std::vector<Eigen::VectorXd> samples;
    std::vector<double> trace;  // log target value per transition (warmup included)
    double acceptance_rate = 0.0;
    std::size_t divergences = 0;
    double adapted_step_size = 0.0;
};

// Leapfrog HMC with dual-averaging step size adaptation during warmup.
// Divergent transitions (energy error > 1000 or non-finite trajectory) are
// rejected and counted. Non-finite gradient at the current chain state is a
// hard numeric error.
HmcResult hmc_sample(const TargetFn& target, const Eigen::VectorXd& init,
                     const HmcConfig& config, int draws, Rng& rng);

struct SviResult {
    Eigen::VectorXd mean;
    Eigen::VectorXd log_std;
    std::vector<double> elbo_trace;  // single-sample estimates, one per iteration
    bool convergence_warning = false;
};

// Mean-field normal variational fit with reparameterized single-sample
// gradients and Adam under a cosine learning-rate decay. The target callback
// may be stochastic (minibatch scaled); it must stay finite.
SviResult svi_optimize(const TargetFn& target, const Eigen::VectorXd& init,
                       const SviConfig& config, Rng& rng);

struct FitResult {
    Posterior posterior;
    FitReport report;
};

MixtureParams initial_params(const Eigen::VectorXd& y, Eigen::Index components,
                             Eigen::Index features);

FitResult fit_hmc(const FitData& data, const BasisSet& basis,
                  const PriorSpec& prior, const FitConfig& config,
                  const ModelNormalization& normalization);
FitResult fit_svi(const FitData& data, const BasisSet& basis,
                  const PriorSpec& prior, const FitConfig& config,
                  const ModelNormalization& normalization);
FitResult fit_stream(const FitData& data, const BasisSet& basis,
                     const PriorSpec& prior, const FitConfig& config,
                     const ModelNormalization& normalization);

struct FitBothResult {
    FitResult match;
    FitResult nonmatch;
};

// Independent fits of both score streams, each over its own covariate subset
// with its own pruned basis and a seed derived per stream.
FitBothResult fit_both(const PairDataset& ds,
                       const std::vector<std::string>& match_covariates,
                       const std::vector<std::string>& nonmatch_covariates,
                       const BasisConfig& basis_config, const PriorSpec& prior,
                       const FitConfig& config);

}  // namespace covaroc
