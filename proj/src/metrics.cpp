#include "covaroc/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "covaroc/error.hpp"

namespace covaroc {

Orientation orientation_from_name(const std::string& name) {
    if (name == "distance") return Orientation::Distance;
    if (name == "similarity") return Orientation::Similarity;
    throw Error(ErrorKind::Config, "unknown orientation '" + name + "'");
}

std::string orientation_name(Orientation orientation) {
    return orientation == Orientation::Distance ? "distance" : "similarity";
}

double CovariateQuery::value_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return values[i];
    throw Error(ErrorKind::Config, "query does not provide covariate '" + name + "'");
}

MetricResult summarize_draws(std::vector<double> per_draw, double mass) {
    if (per_draw.empty())
        throw Error(ErrorKind::Precondition, "summarize_draws: no draws");
    MetricResult result;
    result.point = sample_median(per_draw);
    result.interval = central_interval(per_draw, mass);
    result.mass = mass;
    result.per_draw = std::move(per_draw);
    return result;
}

double quantile(const MixtureParams& p, const Eigen::VectorXd& phi, double prob) {
    if (!(prob > 0.0 && prob < 1.0))
        throw Error(ErrorKind::Precondition, "quantile: prob must lie in (0,1)");
    const Eigen::VectorXd mu = locations_at(p, phi);
    const double sigma_max = p.log_sigmas.array().exp().maxCoeff();
    double lo = mu.minCoeff() - 40.0 * sigma_max;
    double hi = mu.maxCoeff() + 40.0 * sigma_max;
    const double cdf_lo = cdf(p, phi, lo);
    const double cdf_hi = cdf(p, phi, hi);
    // Negated form so NaN endpoints (pathological parameters) also throw.
    if (!(cdf_lo <= prob && cdf_hi >= prob))
        throw Error(ErrorKind::Numeric,
                    "quantile bracket [" + format_double(lo) + ", " +
                        format_double(hi) + "] does not enclose prob " +
                        format_double(prob));
    double mid = 0.5 * (lo + hi);
    for (int iter = 0; iter < 80; ++iter) {
        mid = 0.5 * (lo + hi);
        const double c = cdf(p, phi, mid);
        if (std::abs(c - prob) <= 1e-9) return mid;
        if (c < prob)
            lo = mid;
        else
            hi = mid;
    }
    return mid;
}

Eigen::VectorXd query_features(const Posterior& posterior,
                               const CovariateQuery& q) {
    const auto& norm = posterior.normalization;
    Eigen::VectorXd x(static_cast<Eigen::Index>(norm.covariate_names.size()));
    for (std::size_t d = 0; d < norm.covariate_names.size(); ++d)
        x[static_cast<Eigen::Index>(d)] =
            norm.covariates[d].apply(q.value_of(norm.covariate_names[d]));
    return posterior.basis.featurize_const(x);
}

namespace {

void check_fpr_grid(const std::vector<double>& fpr_grid) {
    if (fpr_grid.empty())
        throw Error(ErrorKind::Precondition, "empty fpr grid");
    double prev = 0.0;
    for (double f : fpr_grid) {
        if (!(f > 0.0 && f < 1.0))
            throw Error(ErrorKind::Config, "fpr grid values must lie in (0,1)");
        if (f <= prev && prev != 0.0)
            throw Error(ErrorKind::Config, "fpr grid must be strictly increasing");
        prev = f;
    }
}

void check_paired(const Posterior& match, const Posterior& nonmatch) {
    if (match.draws.size() != nonmatch.draws.size())
        throw Error(ErrorKind::Config,
                    "posterior draw counts differ (" +
                        std::to_string(match.draws.size()) + " vs " +
                        std::to_string(nonmatch.draws.size()) + ")");
    if (match.draws.empty())
        throw Error(ErrorKind::Precondition, "posterior has no draws");
}

// One paired draw's TPR at one FPR, composed on the raw score axis.
double draw_tpr(const MixtureParams& m, const Eigen::VectorXd& phi_m,
                const Affine& match_score, const MixtureParams& nm,
                const Eigen::VectorXd& phi_nm, const Affine& nonmatch_score,
                double fpr, Orientation orientation) {
    const double prob =
        orientation == Orientation::Distance ? fpr : 1.0 - fpr;
    const double t_norm = quantile(nm, phi_nm, prob);
    const double t_raw = nonmatch_score.invert(t_norm);
    const double c = cdf(m, phi_m, match_score.apply(t_raw));
    return orientation == Orientation::Distance ? c : 1.0 - c;
}

}  // namespace

RocCurve roc_at(const Posterior& match, const Posterior& nonmatch,
                const CovariateQuery& q, const std::vector<double>& fpr_grid,
                Orientation orientation) {
    check_paired(match, nonmatch);
    check_fpr_grid(fpr_grid);
    const Eigen::VectorXd phi_m = query_features(match, q);
    const Eigen::VectorXd phi_nm = query_features(nonmatch, q);

    RocCurve curve;
    curve.fpr = fpr_grid;
    const Eigen::Index draws = static_cast<Eigen::Index>(match.draws.size());
    curve.tpr.resize(draws, static_cast<Eigen::Index>(fpr_grid.size()));
    for (Eigen::Index d = 0; d < draws; ++d)
        for (std::size_t g = 0; g < fpr_grid.size(); ++g)
            curve.tpr(d, static_cast<Eigen::Index>(g)) = draw_tpr(
                match.draws[static_cast<std::size_t>(d)], phi_m,
                match.normalization.score,
                nonmatch.draws[static_cast<std::size_t>(d)], phi_nm,
                nonmatch.normalization.score, fpr_grid[g], orientation);
    return curve;
}

MetricResult tpr_at_fpr(const Posterior& match, const Posterior& nonmatch,
                        const CovariateQuery& q, double fpr, double mass,
                        Orientation orientation) {
    if (!(fpr > 0.0 && fpr < 1.0))
        throw Error(ErrorKind::Config, "fpr must lie in (0,1)");
    const RocCurve curve = roc_at(match, nonmatch, q, {fpr}, orientation);
    std::vector<double> per_draw(static_cast<std::size_t>(curve.tpr.rows()));
    for (Eigen::Index d = 0; d < curve.tpr.rows(); ++d)
        per_draw[static_cast<std::size_t>(d)] = curve.tpr(d, 0);
    return summarize_draws(std::move(per_draw), mass);
}

std::vector<double> auc_fpr_grid() {
    std::vector<double> grid;
    grid.reserve(512);
    for (int i = 0; i < 256; ++i) {
        const double t = static_cast<double>(i) / 255.0;
        grid.push_back(std::pow(10.0, -6.0 + 5.0 * t));
    }
    const double hi = 1.0 - 1e-6;
    for (int i = 1; i <= 256; ++i)
        grid.push_back(0.1 + (hi - 0.1) * static_cast<double>(i) / 256.0);
    return grid;
}

MetricResult auc_at(const Posterior& match, const Posterior& nonmatch,
                    const CovariateQuery& q, double mass,
                    Orientation orientation) {
    const std::vector<double> grid = auc_fpr_grid();
    const RocCurve curve = roc_at(match, nonmatch, q, grid, orientation);
    std::vector<double> per_draw(static_cast<std::size_t>(curve.tpr.rows()));
    for (Eigen::Index d = 0; d < curve.tpr.rows(); ++d) {
        double auc = 0.0;
        double prev_f = 0.0, prev_t = 0.0;  // closure at (0,0)
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const double f = grid[g];
            const double t = curve.tpr(d, static_cast<Eigen::Index>(g));
            auc += 0.5 * (f - prev_f) * (t + prev_t);
            prev_f = f;
            prev_t = t;
        }
        auc += 0.5 * (1.0 - prev_f) * (1.0 + prev_t);  // closure at (1,1)
        per_draw[static_cast<std::size_t>(d)] = std::min(1.0, std::max(0.0, auc));
    }
    return summarize_draws(std::move(per_draw), mass);
}

MetricResult threshold_at(const Posterior& nonmatch, const CovariateQuery& q,
                          double fpr, double mass, Orientation orientation) {
    if (!(fpr > 0.0 && fpr < 1.0))
        throw Error(ErrorKind::Config, "fpr must lie in (0,1)");
    if (nonmatch.draws.empty())
        throw Error(ErrorKind::Precondition, "posterior has no draws");
    const Eigen::VectorXd phi = query_features(nonmatch, q);
    const double prob = orientation == Orientation::Distance ? fpr : 1.0 - fpr;
    std::vector<double> per_draw;
    per_draw.reserve(nonmatch.draws.size());
    for (const auto& draw : nonmatch.draws)
        per_draw.push_back(
            nonmatch.normalization.score.invert(quantile(draw, phi, prob)));
    return summarize_draws(std::move(per_draw), mass);
}

MetricKind metric_kind_from_name(const std::string& name) {
    if (name == "tpr") return MetricKind::TprAtFpr;
    if (name == "auc") return MetricKind::Auc;
    if (name == "threshold") return MetricKind::Threshold;
    throw Error(ErrorKind::Config, "unknown metric '" + name + "'");
}

std::string metric_kind_name(MetricKind kind) {
    switch (kind) {
        case MetricKind::TprAtFpr: return "tpr";
        case MetricKind::Auc: return "auc";
        case MetricKind::Threshold: return "threshold";
    }
    return "tpr";
}

std::vector<MetricResult> metric_surface(const Posterior& match,
                                         const Posterior& nonmatch,
                                         const std::vector<CovariateQuery>& grid,
                                         const SurfaceRequest& request) {
    if (grid.empty())
        throw Error(ErrorKind::Precondition, "metric_surface: empty grid");
    std::vector<MetricResult> results(grid.size());
    parallel_for(grid.size(), request.workers, [&](std::size_t i) {
        switch (request.metric) {
            case MetricKind::TprAtFpr:
                results[i] = tpr_at_fpr(match, nonmatch, grid[i], request.fpr,
                                        request.mass, request.orientation);
                break;
            case MetricKind::Auc:
                results[i] = auc_at(match, nonmatch, grid[i], request.mass,
                                    request.orientation);
                break;
            case MetricKind::Threshold:
                results[i] = threshold_at(nonmatch, grid[i], request.fpr,
                                          request.mass, request.orientation);
                break;
        }
    });
    return results;
}

MetricResult r_squared(const std::vector<MetricResult>& estimates,
                       const std::vector<double>& oracle, double mass) {
    if (estimates.size() != oracle.size())
        throw Error(ErrorKind::Precondition,
                    "r_squared: estimate and oracle lengths differ");
    if (estimates.size() < 2)
        throw Error(ErrorKind::DegenerateOracle,
                    "r_squared: need >= 2 oracle points");
    const std::size_t draws = estimates.front().per_draw.size();
    for (const auto& e : estimates)
        if (e.per_draw.size() != draws)
            throw Error(ErrorKind::Precondition,
                        "r_squared: inconsistent draw counts across points");

    const double mean_oracle = mean(oracle);
    double ss_tot = 0.0;
    for (double o : oracle) ss_tot += (o - mean_oracle) * (o - mean_oracle);
    if (!(ss_tot > 0.0))
        throw Error(ErrorKind::DegenerateOracle,
                    "oracle values have zero variance");

    std::vector<double> per_draw(draws);
    for (std::size_t d = 0; d < draws; ++d) {
        double ss_res = 0.0;
        for (std::size_t i = 0; i < estimates.size(); ++i) {
            const double diff = estimates[i].per_draw[d] - oracle[i];
            ss_res += diff * diff;
        }
        per_draw[d] = 1.0 - ss_res / ss_tot;
    }
    return summarize_draws(std::move(per_draw), mass);
}

}  // namespace covaroc
