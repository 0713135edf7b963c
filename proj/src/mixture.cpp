#include "covaroc/mixture.hpp"

#include <atomic>
#include <cmath>
#include <string>

#include "covaroc/error.hpp"
#include "covaroc/stats.hpp"

namespace covaroc {

namespace {

constexpr double kLogFloor = -745.0;

std::atomic<std::uint64_t> g_underflows{0};

void check_phi(const MixtureParams& p, const Eigen::VectorXd& phi) {
    if (phi.size() != p.features())
        throw Error(ErrorKind::MalformedInput,
                    "feature vector length " + std::to_string(phi.size()) +
                        " does not match parameter width " +
                        std::to_string(p.features()));
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    const double m = logits.maxCoeff();
    Eigen::VectorXd w = (logits.array() - m).exp();
    return w / w.sum();
}

double clamp_log_density(double value) {
    if (value < kLogFloor) {
        g_underflows.fetch_add(1, std::memory_order_relaxed);
        return kLogFloor;
    }
    return value;
}

}  // namespace

void MixtureParams::validate() const {
    const Eigen::Index h = components();
    if (h < 1)
        throw Error(ErrorKind::MalformedInput, "mixture needs >= 1 component");
    if (W_locations.rows() != h || W_locations.cols() != features() ||
        log_sigmas.size() != h)
        throw Error(ErrorKind::MalformedInput, "mixture parameter shapes disagree");
    if (!W_weights.allFinite() || !W_locations.allFinite() ||
        !log_sigmas.allFinite())
        throw Error(ErrorKind::Numeric, "non-finite mixture parameter");
}

MixtureGrad MixtureGrad::zeros(Eigen::Index components, Eigen::Index features) {
    MixtureGrad g;
    g.W_weights = Eigen::MatrixXd::Zero(components, features);
    g.W_locations = Eigen::MatrixXd::Zero(components, features);
    g.log_sigmas = Eigen::VectorXd::Zero(components);
    return g;
}

Eigen::VectorXd weights_at(const MixtureParams& p, const Eigen::VectorXd& phi) {
    check_phi(p, phi);
    return softmax(p.W_weights * phi);
}

Eigen::VectorXd locations_at(const MixtureParams& p, const Eigen::VectorXd& phi) {
    check_phi(p, phi);
    return p.W_locations * phi;
}

double log_density(const MixtureParams& p, double y, const Eigen::VectorXd& phi) {
    check_phi(p, phi);
    const Eigen::VectorXd logits = p.W_weights * phi;
    const Eigen::VectorXd mu = p.W_locations * phi;
    const Eigen::Index h = p.components();
    Eigen::VectorXd terms(h);
    for (Eigen::Index k = 0; k < h; ++k)
        terms[k] = logits[k] + log_normal_pdf(y, mu[k], std::exp(p.log_sigmas[k]));
    const double value = logsumexp({terms.data(), static_cast<std::size_t>(h)}) -
                         logsumexp({logits.data(), static_cast<std::size_t>(h)});
    return clamp_log_density(value);
}

double log_density_grad(const MixtureParams& p, double y,
                        const Eigen::VectorXd& phi, MixtureGrad& grad) {
    check_phi(p, phi);
    const Eigen::Index h = p.components();
    const Eigen::VectorXd logits = p.W_weights * phi;
    const Eigen::VectorXd mu = p.W_locations * phi;
    Eigen::VectorXd scored(h);
    Eigen::VectorXd z(h);
    Eigen::VectorXd inv_sigma(h);
    for (Eigen::Index k = 0; k < h; ++k) {
        const double sigma = std::exp(p.log_sigmas[k]);
        inv_sigma[k] = 1.0 / sigma;
        z[k] = (y - mu[k]) * inv_sigma[k];
        scored[k] = logits[k] - p.log_sigmas[k] - 0.5 * kLogTwoPi - 0.5 * z[k] * z[k];
    }
    const double lse_scored = logsumexp({scored.data(), static_cast<std::size_t>(h)});
    const double lse_logits = logsumexp({logits.data(), static_cast<std::size_t>(h)});
    const Eigen::VectorXd r = (scored.array() - lse_scored).exp();
    const Eigen::VectorXd w = (logits.array() - lse_logits).exp();

    grad.W_weights = (r - w) * phi.transpose();
    grad.W_locations =
        (r.array() * z.array() * inv_sigma.array()).matrix() * phi.transpose();
    grad.log_sigmas = (r.array() * (z.array().square() - 1.0)).matrix();
    return clamp_log_density(lse_scored - lse_logits);
}

std::vector<double> sample(const MixtureParams& p, const Eigen::VectorXd& phi,
                           std::size_t n, Rng& rng) {
    if (n < 1)
        throw Error(ErrorKind::Precondition, "sample: n must be >= 1");
    const Eigen::VectorXd w = weights_at(p, phi);
    const Eigen::VectorXd mu = locations_at(p, phi);
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform();
        double acc = 0.0;
        Eigen::Index pick = p.components() - 1;
        for (Eigen::Index k = 0; k < p.components(); ++k) {
            acc += w[k];
            if (u < acc) {
                pick = k;
                break;
            }
        }
        out.push_back(mu[pick] + std::exp(p.log_sigmas[pick]) * rng.normal());
    }
    return out;
}

double cdf(const MixtureParams& p, const Eigen::VectorXd& phi, double y) {
    const Eigen::VectorXd w = weights_at(p, phi);
    const Eigen::VectorXd mu = locations_at(p, phi);
    double acc = 0.0;
    for (Eigen::Index k = 0; k < p.components(); ++k)
        acc += w[k] * normal_cdf((y - mu[k]) * std::exp(-p.log_sigmas[k]));
    return std::min(1.0, std::max(0.0, acc));
}

namespace {

// Shared batched forward pass: fills per-record responsibilities and
// normalized residuals when gradient buffers are supplied.
double batched_sum(const MixtureParams& p, const Eigen::VectorXd& y,
                   const Eigen::MatrixXd& phi, MixtureGrad* grad) {
    if (phi.cols() != p.features())
        throw Error(ErrorKind::MalformedInput,
                    "feature matrix width does not match parameter width");
    if (y.size() != phi.rows())
        throw Error(ErrorKind::MalformedInput,
                    "response count does not match feature row count");
    const Eigen::Index n = y.size();
    const Eigen::Index h = p.components();

    const Eigen::MatrixXd logits = phi * p.W_weights.transpose();   // n x H
    const Eigen::MatrixXd mu = phi * p.W_locations.transpose();     // n x H
    const Eigen::ArrayXd inv_sigma = (-p.log_sigmas.array()).exp();
    const Eigen::ArrayXd log_norm =
        -p.log_sigmas.array() - 0.5 * kLogTwoPi;

    Eigen::ArrayXXd z = (-mu).array();
    z.colwise() += y.array();
    z.rowwise() *= inv_sigma.transpose();

    Eigen::ArrayXXd scored = logits.array() - 0.5 * z.square();
    scored.rowwise() += log_norm.transpose();

    const Eigen::ArrayXd max_scored = scored.rowwise().maxCoeff();
    const Eigen::ArrayXd lse_scored =
        max_scored + (scored.colwise() - max_scored).exp().rowwise().sum().log();
    const Eigen::ArrayXd max_logits = logits.array().rowwise().maxCoeff();
    const Eigen::ArrayXd lse_logits =
        max_logits +
        (logits.array().colwise() - max_logits).exp().rowwise().sum().log();

    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        total += clamp_log_density(lse_scored[i] - lse_logits[i]);

    if (grad) {
        const Eigen::ArrayXXd r = (scored.colwise() - lse_scored).exp();
        const Eigen::ArrayXXd w = (logits.array().colwise() - lse_logits).exp();
        grad->W_weights = (r - w).matrix().transpose() * phi;
        Eigen::ArrayXXd a = r * z;
        a.rowwise() *= inv_sigma.transpose();
        grad->W_locations = a.matrix().transpose() * phi;
        grad->log_sigmas = (r * (z.square() - 1.0)).colwise().sum().matrix();
        if (grad->log_sigmas.size() != h)
            grad->log_sigmas.resize(h);
    }
    return total;
}

}  // namespace

double log_density_sum(const MixtureParams& p, const Eigen::VectorXd& y,
                       const Eigen::MatrixXd& phi) {
    return batched_sum(p, y, phi, nullptr);
}

double log_density_sum_grad(const MixtureParams& p, const Eigen::VectorXd& y,
                            const Eigen::MatrixXd& phi, MixtureGrad& grad) {
    return batched_sum(p, y, phi, &grad);
}

Eigen::Index flat_size(Eigen::Index components, Eigen::Index features) {
    return 2 * components * features + components;
}

Eigen::VectorXd flatten(const MixtureParams& p) {
    const Eigen::Index h = p.components();
    const Eigen::Index f = p.features();
    Eigen::VectorXd theta(flat_size(h, f));
    Eigen::Index at = 0;
    for (Eigen::Index r = 0; r < h; ++r)
        for (Eigen::Index c = 0; c < f; ++c) theta[at++] = p.W_weights(r, c);
    for (Eigen::Index r = 0; r < h; ++r)
        for (Eigen::Index c = 0; c < f; ++c) theta[at++] = p.W_locations(r, c);
    for (Eigen::Index r = 0; r < h; ++r) theta[at++] = p.log_sigmas[r];
    return theta;
}

MixtureParams unflatten(const Eigen::VectorXd& theta, Eigen::Index components,
                        Eigen::Index features) {
    if (theta.size() != flat_size(components, features))
        throw Error(ErrorKind::MalformedInput, "flattened parameter length mismatch");
    MixtureParams p;
    p.W_weights.resize(components, features);
    p.W_locations.resize(components, features);
    p.log_sigmas.resize(components);
    Eigen::Index at = 0;
    for (Eigen::Index r = 0; r < components; ++r)
        for (Eigen::Index c = 0; c < features; ++c) p.W_weights(r, c) = theta[at++];
    for (Eigen::Index r = 0; r < components; ++r)
        for (Eigen::Index c = 0; c < features; ++c) p.W_locations(r, c) = theta[at++];
    for (Eigen::Index r = 0; r < components; ++r) p.log_sigmas[r] = theta[at++];
    return p;
}

Eigen::VectorXd flatten_grad(const MixtureGrad& g) {
    MixtureParams view;
    view.W_weights = g.W_weights;
    view.W_locations = g.W_locations;
    view.log_sigmas = g.log_sigmas;
    return flatten(view);
}

std::uint64_t underflow_count() {
    return g_underflows.load(std::memory_order_relaxed);
}

void reset_underflow_count() { g_underflows.store(0, std::memory_order_relaxed); }

}  // namespace covaroc
