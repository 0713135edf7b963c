#include "covaroc/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "covaroc/error.hpp"
#include "covaroc/stats.hpp"

namespace covaroc {

FitMethod fit_method_from_name(const std::string& name) {
    if (name == "hmc") return FitMethod::Hmc;
    if (name == "svi") return FitMethod::Svi;
    throw Error(ErrorKind::Config, "unknown fit method '" + name + "'");
}

std::string fit_method_name(FitMethod method) {
    return method == FitMethod::Hmc ? "hmc" : "svi";
}

void FitConfig::validate() const {
    if (draws < 2) throw Error(ErrorKind::Config, "draws must be >= 2");
    if (components < 1) throw Error(ErrorKind::Config, "components must be >= 1");
    if (hmc.leapfrog_steps < 1)
        throw Error(ErrorKind::Config, "leapfrog_steps must be >= 1");
    if (hmc.warmup < 0) throw Error(ErrorKind::Config, "warmup must be >= 0");
    if (!(hmc.step_size > 0.0))
        throw Error(ErrorKind::Config, "step_size must be > 0");
    if (!(hmc.target_accept > 0.0 && hmc.target_accept < 1.0))
        throw Error(ErrorKind::Config, "target_accept must lie in (0,1)");
    if (svi.iterations < 1)
        throw Error(ErrorKind::Config, "iterations must be >= 1");
    if (svi.minibatch_size < 1)
        throw Error(ErrorKind::Config, "minibatch_size must be >= 1");
    if (!(svi.learning_rate > 0.0))
        throw Error(ErrorKind::Config, "learning_rate must be > 0");
    if (svi.posterior_samples < 0)
        throw Error(ErrorKind::Config, "posterior_samples must be >= 0");
}

FitData prepare_fit_data(const PairDataset& ds, bool match_stream,
                         const std::vector<std::string>& covariate_names,
                         const BasisSet& basis) {
    std::vector<std::size_t> dims;
    dims.reserve(covariate_names.size());
    for (const auto& name : covariate_names)
        dims.push_back(ds.covariate_index(name));

    std::vector<const PairRecord*> records;
    for (const auto& rec : ds.records)
        if (rec.match == match_stream) records.push_back(&rec);
    if (records.empty())
        throw Error(ErrorKind::Precondition,
                    std::string(match_stream ? "match" : "non-match") +
                        " stream is empty");

    FitData data;
    const Eigen::Index n = static_cast<Eigen::Index>(records.size());
    data.y.resize(n);
    data.phi.resize(n, static_cast<Eigen::Index>(basis.num_features()));
    Eigen::VectorXd x(static_cast<Eigen::Index>(dims.size()));
    for (Eigen::Index i = 0; i < n; ++i) {
        const PairRecord& rec = *records[static_cast<std::size_t>(i)];
        data.y[i] = ds.normalized_score(rec);
        for (std::size_t d = 0; d < dims.size(); ++d)
            x[static_cast<Eigen::Index>(d)] = ds.normalized_covariate(rec, dims[d]);
        data.phi.row(i) = basis.featurize_const(x).transpose();
    }
    return data;
}

double prior_log_density(const MixtureParams& p, const PriorSpec& prior) {
    const double cs = prior.coefficient_scale;
    const double ls = prior.log_sigma_scale;
    const double nw =
        static_cast<double>(2 * p.components() * p.features());
    double value = -nw * (std::log(cs) + 0.5 * kLogTwoPi);
    value -= (p.W_weights.squaredNorm() + p.W_locations.squaredNorm()) /
             (2.0 * cs * cs);
    value -= static_cast<double>(p.components()) *
             (std::log(ls) + 0.5 * kLogTwoPi);
    value -= (p.log_sigmas.array() - prior.log_sigma_loc).square().sum() /
             (2.0 * ls * ls);
    return value;
}

namespace {

void add_prior_grad(const MixtureParams& p, const PriorSpec& prior,
                    MixtureGrad& grad) {
    const double inv_cs2 = 1.0 / (prior.coefficient_scale * prior.coefficient_scale);
    const double inv_ls2 = 1.0 / (prior.log_sigma_scale * prior.log_sigma_scale);
    grad.W_weights -= p.W_weights * inv_cs2;
    grad.W_locations -= p.W_locations * inv_cs2;
    grad.log_sigmas -= (p.log_sigmas.array() - prior.log_sigma_loc).matrix() * inv_ls2;
}

void check_scale(double scale_factor) {
    if (!(scale_factor >= 1.0))
        throw Error(ErrorKind::Precondition, "scale_factor must be >= 1");
}

}  // namespace

double log_posterior(const MixtureParams& p, const PriorSpec& prior,
                     const Eigen::VectorXd& y, const Eigen::MatrixXd& phi,
                     double scale_factor) {
    check_scale(scale_factor);
    if (y.size() == 0)
        throw Error(ErrorKind::Precondition, "log_posterior: empty data");
    return scale_factor * log_density_sum(p, y, phi) + prior_log_density(p, prior);
}

double log_posterior_grad(const MixtureParams& p, const PriorSpec& prior,
                          const Eigen::VectorXd& y, const Eigen::MatrixXd& phi,
                          double scale_factor, MixtureGrad& grad) {
    check_scale(scale_factor);
    if (y.size() == 0)
        throw Error(ErrorKind::Precondition, "log_posterior: empty data");
    const double like = log_density_sum_grad(p, y, phi, grad);
    grad.W_weights *= scale_factor;
    grad.W_locations *= scale_factor;
    grad.log_sigmas *= scale_factor;
    add_prior_grad(p, prior, grad);
    return scale_factor * like + prior_log_density(p, prior);
}

namespace {

std::string snapshot(const Eigen::VectorXd& q) {
    std::string s = "theta[0.." + std::to_string(std::min<Eigen::Index>(q.size(), 6) - 1) + "] = {";
    for (Eigen::Index i = 0; i < std::min<Eigen::Index>(q.size(), 6); ++i) {
        if (i) s += ", ";
        s += format_double(q[i]);
    }
    s += "}, |theta| = " + format_double(q.norm());
    return s;
}

Eigen::VectorXd standard_normal(Eigen::Index dim, Rng& rng) {
    Eigen::VectorXd v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = rng.normal();
    return v;
}

}  // namespace

LeapfrogResult leapfrog(const TargetFn& target, Eigen::VectorXd& q,
                        Eigen::VectorXd& p, Eigen::VectorXd& grad, double logp,
                        double step_size, int steps) {
    LeapfrogResult result;
    result.logp = logp;
    p += 0.5 * step_size * grad;
    for (int step = 0; step < steps; ++step) {
        q += step_size * p;
        result.logp = target(q, grad);
        if (!std::isfinite(result.logp) || !grad.allFinite()) return result;
        p += (step + 1 < steps ? step_size : 0.5 * step_size) * grad;
    }
    result.finite = true;
    return result;
}

HmcResult hmc_sample(const TargetFn& target, const Eigen::VectorXd& init,
                     const HmcConfig& config, int draws, Rng& rng) {
    const Eigen::Index dim = init.size();
    Eigen::VectorXd q = init;
    Eigen::VectorXd grad_q(dim);
    double logp_q = target(q, grad_q);
    if (!std::isfinite(logp_q) || !grad_q.allFinite())
        throw Error(ErrorKind::Numeric,
                    "non-finite target or gradient at the initial state; " +
                        snapshot(q));

    // Dual averaging toward the target acceptance rate (warmup only).
    double eps = config.step_size;
    const double mu = std::log(10.0 * eps);
    double log_eps_bar = 0.0;
    double h_bar = 0.0;
    const double gamma = 0.05;
    const double t0 = 10.0;
    const double kappa = 0.75;

    HmcResult result;
    result.samples.reserve(static_cast<std::size_t>(draws));
    const int total = config.warmup + draws;
    result.trace.reserve(static_cast<std::size_t>(total));
    std::size_t accepted_sampling = 0;

    Eigen::VectorXd p(dim), q_new(dim), grad_new(dim);
    for (int iter = 0; iter < total; ++iter) {
        p = standard_normal(dim, rng);
        const double h0 = -logp_q + 0.5 * p.squaredNorm();

        q_new = q;
        grad_new = grad_q;
        const LeapfrogResult traj =
            leapfrog(target, q_new, p, grad_new, logp_q, eps, config.leapfrog_steps);

        double accept_prob = 0.0;
        bool divergent = !traj.finite;
        if (traj.finite) {
            const double h1 = -traj.logp + 0.5 * p.squaredNorm();
            const double delta = h1 - h0;
            if (!std::isfinite(delta) || delta > 1000.0) {
                divergent = true;
            } else {
                accept_prob = std::min(1.0, std::exp(-delta));
            }
        }
        if (divergent) ++result.divergences;

        bool accepted = false;
        if (!divergent && rng.uniform() < accept_prob) {
            q = q_new;
            grad_q = grad_new;
            logp_q = traj.logp;
            accepted = true;
        }

        if (iter < config.warmup) {
            const double m = static_cast<double>(iter + 1);
            h_bar = (1.0 - 1.0 / (m + t0)) * h_bar +
                    (config.target_accept - accept_prob) / (m + t0);
            const double log_eps = mu - std::sqrt(m) / gamma * h_bar;
            const double eta = std::pow(m, -kappa);
            log_eps_bar = eta * log_eps + (1.0 - eta) * log_eps_bar;
            eps = std::exp(log_eps);
            if (iter + 1 == config.warmup) eps = std::exp(log_eps_bar);
        } else {
            result.samples.push_back(q);
            if (accepted) ++accepted_sampling;
        }
        result.trace.push_back(logp_q);
    }
    result.acceptance_rate =
        draws > 0 ? static_cast<double>(accepted_sampling) / draws : 0.0;
    result.adapted_step_size = eps;
    return result;
}

SviResult svi_optimize(const TargetFn& target, const Eigen::VectorXd& init,
                       const SviConfig& config, Rng& rng) {
    const Eigen::Index dim = init.size();
    Eigen::VectorXd m = init;
    Eigen::VectorXd s = Eigen::VectorXd::Constant(dim, std::log(0.1));

    // Adam moments over the stacked (mean, log-std) parameter block.
    Eigen::VectorXd adam_m = Eigen::VectorXd::Zero(2 * dim);
    Eigen::VectorXd adam_v = Eigen::VectorXd::Zero(2 * dim);
    const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

    SviResult result;
    result.elbo_trace.reserve(static_cast<std::size_t>(config.iterations));

    Eigen::VectorXd eps(dim), theta(dim), grad_theta(dim);
    for (int t = 1; t <= config.iterations; ++t) {
        eps = standard_normal(dim, rng);
        theta = m + s.array().exp().matrix().cwiseProduct(eps);
        const double logp = target(theta, grad_theta);
        if (!std::isfinite(logp) || !grad_theta.allFinite())
            throw Error(ErrorKind::Numeric,
                        "ELBO estimate became non-finite at iteration " +
                            std::to_string(t) + "; " + snapshot(theta));

        // Entropy of the factorized normal enters through logq(theta).
        double logq = 0.0;
        for (Eigen::Index i = 0; i < dim; ++i)
            logq += -s[i] - 0.5 * kLogTwoPi - 0.5 * eps[i] * eps[i];
        result.elbo_trace.push_back(logp - logq);

        // Reparameterized ascent gradients: d/dm = grad, d/ds = grad*eps*e^s + 1.
        const double progress =
            static_cast<double>(t - 1) / static_cast<double>(config.iterations);
        const double lr = config.learning_rate * 0.5 * (1.0 + std::cos(M_PI * progress));
        const double bc1 = 1.0 - std::pow(beta1, t);
        const double bc2 = 1.0 - std::pow(beta2, t);
        for (Eigen::Index i = 0; i < dim; ++i) {
            const double gm = grad_theta[i];
            const double gs = grad_theta[i] * eps[i] * std::exp(s[i]) + 1.0;
            adam_m[i] = beta1 * adam_m[i] + (1.0 - beta1) * gm;
            adam_v[i] = beta2 * adam_v[i] + (1.0 - beta2) * gm * gm;
            adam_m[dim + i] = beta1 * adam_m[dim + i] + (1.0 - beta1) * gs;
            adam_v[dim + i] = beta2 * adam_v[dim + i] + (1.0 - beta2) * gs * gs;
            m[i] += lr * (adam_m[i] / bc1) / (std::sqrt(adam_v[i] / bc2) + adam_eps);
            s[i] += lr * (adam_m[dim + i] / bc1) /
                    (std::sqrt(adam_v[dim + i] / bc2) + adam_eps);
        }
    }

    // Non-improving ELBO over the final fifth signals a convergence problem.
    const std::size_t n = result.elbo_trace.size();
    const std::size_t fifth = std::max<std::size_t>(1, n / 5);
    if (n >= 2 * fifth) {
        const auto mean_over = [&](std::size_t lo, std::size_t hi) {
            double acc = 0.0;
            for (std::size_t i = lo; i < hi; ++i) acc += result.elbo_trace[i];
            return acc / static_cast<double>(hi - lo);
        };
        const double last = mean_over(n - fifth, n);
        const double prev = mean_over(n - 2 * fifth, n - fifth);
        result.convergence_warning = !(last > prev);
    }

    result.mean = std::move(m);
    result.log_std = std::move(s);
    return result;
}

MixtureParams initial_params(const Eigen::VectorXd& y, Eigen::Index components,
                             Eigen::Index features) {
    std::vector<double> values(y.data(), y.data() + y.size());
    const double sd = population_std(values);
    MixtureParams p;
    p.W_weights = Eigen::MatrixXd::Zero(components, features);
    p.W_locations = Eigen::MatrixXd::Zero(components, features);
    p.log_sigmas = Eigen::VectorXd::Constant(
        components,
        std::log(std::max(sd, 1e-6) / static_cast<double>(components)));
    for (Eigen::Index h = 0; h < components; ++h) {
        const double level =
            (static_cast<double>(h) + 0.5) / static_cast<double>(components);
        p.W_locations(h, features - 1) = sample_quantile(values, level);
    }
    return p;
}

namespace {

FitDiagnostics make_hmc_diagnostics(const HmcResult& run, int total_transitions) {
    FitDiagnostics diag;
    diag.method = "hmc";
    diag.acceptance_rate = run.acceptance_rate;
    diag.divergences = run.divergences;
    if (total_transitions > 0 &&
        static_cast<double>(run.divergences) > 0.2 * total_transitions) {
        diag.divergence_warning = true;
        diag.warnings.push_back(
            "divergence rate above 20% (" + std::to_string(run.divergences) +
            " of " + std::to_string(total_transitions) +
            " transitions); posterior quality is suspect");
    }
    return diag;
}

}  // namespace

FitResult fit_hmc(const FitData& data, const BasisSet& basis,
                  const PriorSpec& prior, const FitConfig& config,
                  const ModelNormalization& normalization) {
    config.validate();
    if (data.y.size() == 0)
        throw Error(ErrorKind::Precondition, "fit_hmc: empty data");
    const auto start = std::chrono::steady_clock::now();

    const Eigen::Index h = config.components;
    const Eigen::Index f = static_cast<Eigen::Index>(basis.num_features());
    if (data.phi.cols() != f)
        throw Error(ErrorKind::Precondition, "fit_hmc: feature width mismatch");

    MixtureGrad grad_buf = MixtureGrad::zeros(h, f);
    const TargetFn target = [&](const Eigen::VectorXd& theta,
                                Eigen::VectorXd& grad) {
        const MixtureParams p = unflatten(theta, h, f);
        const double value =
            log_posterior_grad(p, prior, data.y, data.phi, 1.0, grad_buf);
        grad = flatten_grad(grad_buf);
        return value;
    };

    Rng rng(config.seed);
    const Eigen::VectorXd init = flatten(initial_params(data.y, h, f));
    const HmcResult run = hmc_sample(target, init, config.hmc, config.draws, rng);

    FitResult result;
    result.posterior.basis = basis;
    result.posterior.prior = prior;
    result.posterior.normalization = normalization;
    result.posterior.draws.reserve(run.samples.size());
    for (const auto& s : run.samples)
        result.posterior.draws.push_back(unflatten(s, h, f));
    result.posterior.diagnostics =
        make_hmc_diagnostics(run, config.hmc.warmup + config.draws);
    result.report.trace = run.trace;
    result.report.seed = config.seed;
    result.report.config = config;
    result.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    return result;
}

FitResult fit_svi(const FitData& data, const BasisSet& basis,
                  const PriorSpec& prior, const FitConfig& config,
                  const ModelNormalization& normalization) {
    config.validate();
    const Eigen::Index n = data.y.size();
    if (n == 0) throw Error(ErrorKind::Precondition, "fit_svi: empty data");
    const auto start = std::chrono::steady_clock::now();

    const Eigen::Index h = config.components;
    const Eigen::Index f = static_cast<Eigen::Index>(basis.num_features());
    if (data.phi.cols() != f)
        throw Error(ErrorKind::Precondition, "fit_svi: feature width mismatch");

    const Eigen::Index batch =
        std::min<Eigen::Index>(config.svi.minibatch_size, n);
    const bool full_batch = batch >= n;
    const double scale =
        static_cast<double>(n) / static_cast<double>(batch);

    Rng batch_rng(derive_seed(config.seed, 101));
    Eigen::VectorXd y_buf(batch);
    Eigen::MatrixXd phi_buf(batch, f);
    MixtureGrad grad_buf = MixtureGrad::zeros(h, f);

    const TargetFn target = [&](const Eigen::VectorXd& theta,
                                Eigen::VectorXd& grad) {
        const MixtureParams p = unflatten(theta, h, f);
        double value;
        if (full_batch) {
            value = log_posterior_grad(p, prior, data.y, data.phi, 1.0, grad_buf);
        } else {
            for (Eigen::Index i = 0; i < batch; ++i) {
                const auto row = static_cast<Eigen::Index>(
                    batch_rng.bounded(static_cast<std::uint64_t>(n)));
                y_buf[i] = data.y[row];
                phi_buf.row(i) = data.phi.row(row);
            }
            value = log_posterior_grad(p, prior, y_buf, phi_buf, scale, grad_buf);
        }
        grad = flatten_grad(grad_buf);
        return value;
    };

    Rng opt_rng(derive_seed(config.seed, 102));
    const Eigen::VectorXd init = flatten(initial_params(data.y, h, f));
    const SviResult run = svi_optimize(target, init, config.svi, opt_rng);

    FitResult result;
    result.posterior.basis = basis;
    result.posterior.prior = prior;
    result.posterior.normalization = normalization;
    const int draws = config.posterior_draws();
    Rng draw_rng(derive_seed(config.seed, 103));
    const Eigen::ArrayXd q_std = run.log_std.array().exp();
    result.posterior.draws.reserve(static_cast<std::size_t>(draws));
    for (int d = 0; d < draws; ++d) {
        const Eigen::VectorXd eps = standard_normal(run.mean.size(), draw_rng);
        const Eigen::VectorXd theta =
            run.mean.array() + q_std * eps.array();
        result.posterior.draws.push_back(unflatten(theta, h, f));
    }

    FitDiagnostics diag;
    diag.method = "svi";
    const std::size_t tail =
        std::max<std::size_t>(1, run.elbo_trace.size() / 20);
    double acc = 0.0;
    for (std::size_t i = run.elbo_trace.size() - tail; i < run.elbo_trace.size(); ++i)
        acc += run.elbo_trace[i];
    diag.final_elbo = acc / static_cast<double>(tail);
    diag.convergence_warning = run.convergence_warning;
    if (run.convergence_warning)
        diag.warnings.push_back(
            "ELBO did not improve over the final 20% of iterations");
    result.posterior.diagnostics = diag;

    result.report.trace = run.elbo_trace;
    result.report.seed = config.seed;
    result.report.config = config;
    result.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    return result;
}

FitResult fit_stream(const FitData& data, const BasisSet& basis,
                     const PriorSpec& prior, const FitConfig& config,
                     const ModelNormalization& normalization) {
    return config.method == FitMethod::Hmc
               ? fit_hmc(data, basis, prior, config, normalization)
               : fit_svi(data, basis, prior, config, normalization);
}

namespace {

struct StreamInputs {
    FitData data;
    BasisSet basis;
    ModelNormalization normalization;
};

StreamInputs prepare_stream(const PairDataset& ds, bool match_stream,
                            const std::vector<std::string>& covariate_names,
                            const BasisConfig& basis_config) {
    StreamInputs out;
    out.normalization.score = match_stream ? ds.normalization.match_score
                                           : ds.normalization.nonmatch_score;
    out.normalization.covariate_names = covariate_names;

    std::vector<std::size_t> dims;
    for (const auto& name : covariate_names)
        dims.push_back(ds.covariate_index(name));
    for (std::size_t d : dims)
        out.normalization.covariates.push_back(ds.normalization.covariates[d]);

    std::vector<const PairRecord*> records;
    for (const auto& rec : ds.records)
        if (rec.match == match_stream) records.push_back(&rec);
    if (records.empty())
        throw Error(ErrorKind::Precondition,
                    std::string(match_stream ? "match" : "non-match") +
                        " stream is empty");

    if (dims.empty()) {
        out.basis = BasisSet::constant_only(0);
    } else {
        Eigen::MatrixXd x(static_cast<Eigen::Index>(records.size()),
                          static_cast<Eigen::Index>(dims.size()));
        out.normalization.native_range.resize(dims.size());
        for (std::size_t d = 0; d < dims.size(); ++d) {
            Range native{records.front()->covariates[dims[d]],
                         records.front()->covariates[dims[d]]};
            for (std::size_t i = 0; i < records.size(); ++i) {
                const double v = records[i]->covariates[dims[d]];
                native.lo = std::min(native.lo, v);
                native.hi = std::max(native.hi, v);
                x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) =
                    ds.normalization.covariates[dims[d]].apply(v);
            }
            out.normalization.native_range[d] = native;
        }
        std::vector<Range> ranges(dims.size());
        for (std::size_t d = 0; d < dims.size(); ++d) {
            ranges[d].lo = x.col(static_cast<Eigen::Index>(d)).minCoeff();
            ranges[d].hi = x.col(static_cast<Eigen::Index>(d)).maxCoeff();
        }
        out.basis = prune(place_grid(basis_config, ranges), x,
                          basis_config.prune_distance);
    }
    out.data = prepare_fit_data(ds, match_stream, covariate_names, out.basis);
    return out;
}

}  // namespace

FitBothResult fit_both(const PairDataset& ds,
                       const std::vector<std::string>& match_covariates,
                       const std::vector<std::string>& nonmatch_covariates,
                       const BasisConfig& basis_config, const PriorSpec& prior,
                       const FitConfig& config) {
    config.validate();
    const PairDataset prepared =
        ds.normalization.fitted ? ds : normalize(ds);

    // Empty selection means every dataset covariate.
    const std::vector<std::string>& match_names =
        match_covariates.empty() ? prepared.covariate_names : match_covariates;
    const std::vector<std::string>& nonmatch_names =
        nonmatch_covariates.empty() ? prepared.covariate_names
                                    : nonmatch_covariates;

    StreamInputs match_in =
        prepare_stream(prepared, true, match_names, basis_config);
    StreamInputs nonmatch_in =
        prepare_stream(prepared, false, nonmatch_names, basis_config);

    FitConfig match_cfg = config;
    match_cfg.seed = derive_seed(config.seed, 1);
    FitConfig nonmatch_cfg = config;
    nonmatch_cfg.seed = derive_seed(config.seed, 2);

    FitBothResult result;
    result.match = fit_stream(match_in.data, match_in.basis, prior, match_cfg,
                              match_in.normalization);
    result.nonmatch = fit_stream(nonmatch_in.data, nonmatch_in.basis, prior,
                                 nonmatch_cfg, nonmatch_in.normalization);
    return result;
}

}  // namespace covaroc
