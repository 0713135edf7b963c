#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "covaroc/inference.hpp"
#include "covaroc/stats.hpp"

namespace covaroc {

// Score orientation: distances flag a match below the threshold, similarities
// above it.
enum class Orientation { Distance, Similarity };
Orientation orientation_from_name(const std::string& name);
std::string orientation_name(Orientation orientation);

// Native-unit covariate values addressed by name; each model picks out its
// own subset.
struct CovariateQuery {
    std::vector<std::string> names;
    std::vector<double> values;

    double value_of(const std::string& name) const;
};

struct MetricResult {
    double point = 0.0;  // posterior median
    Interval interval{0.0, 0.0};
    double mass = 0.95;
    std::vector<double> per_draw;
};

MetricResult summarize_draws(std::vector<double> per_draw, double mass);

struct RocCurve {
    std::vector<double> fpr;
    Eigen::MatrixXd tpr;  // draws x gridpoints
};

// y with |cdf(y) - prob| <= 1e-9 by bisection over
// [mu_min - 40 sigma_max, mu_max + 40 sigma_max].
double quantile(const MixtureParams& p, const Eigen::VectorXd& phi, double prob);

// Normalize the query through the model's covariate transforms and featurize.
Eigen::VectorXd query_features(const Posterior& posterior,
                               const CovariateQuery& q);

// Per paired draw: TPR(f) composed from the match CDF and the non-match
// quantile on the raw score axis.
RocCurve roc_at(const Posterior& match, const Posterior& nonmatch,
                const CovariateQuery& q, const std::vector<double>& fpr_grid,
                Orientation orientation = Orientation::Distance);

MetricResult tpr_at_fpr(const Posterior& match, const Posterior& nonmatch,
                        const CovariateQuery& q, double fpr, double mass = 0.95,
                        Orientation orientation = Orientation::Distance);

// Trapezoid integral of TPR over auc_fpr_grid() with endpoint closure to
// (0,0) and (1,1).
MetricResult auc_at(const Posterior& match, const Posterior& nonmatch,
                    const CovariateQuery& q, double mass = 0.95,
                    Orientation orientation = Orientation::Distance);

// Raw-unit decision threshold achieving the requested FPR per draw.
MetricResult threshold_at(const Posterior& nonmatch, const CovariateQuery& q,
                          double fpr, double mass = 0.95,
                          Orientation orientation = Orientation::Distance);

// 256 log-spaced points in [1e-6, 0.1] then 256 linear points in
// (0.1, 1 - 1e-6], strictly increasing.
std::vector<double> auc_fpr_grid();

enum class MetricKind { TprAtFpr, Auc, Threshold };
MetricKind metric_kind_from_name(const std::string& name);
std::string metric_kind_name(MetricKind kind);

struct SurfaceRequest {
    MetricKind metric = MetricKind::TprAtFpr;
    double fpr = 1e-3;
    double mass = 0.95;
    Orientation orientation = Orientation::Distance;
    std::size_t workers = 0;  // 0 -> hardware concurrency
};

std::vector<MetricResult> metric_surface(const Posterior& match,
                                         const Posterior& nonmatch,
                                         const std::vector<CovariateQuery>& grid,
                                         const SurfaceRequest& request);

// Per draw: 1 - SS_res / SS_tot of the draw's estimates against the oracle.
MetricResult r_squared(const std::vector<MetricResult>& estimates,
                       const std::vector<double>& oracle, double mass = 0.90);

}  // namespace covaroc
