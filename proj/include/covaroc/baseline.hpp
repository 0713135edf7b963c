#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "covaroc/dataset.hpp"
#include "covaroc/metrics.hpp"
#include "covaroc/stats.hpp"

namespace covaroc {

// Order-statistic quantile with lower interpolation: sorted[floor(p*(n-1))].
double empirical_quantile_lower(std::vector<double> values, double p);

// ECDF with a weak inequality: fraction of values <= t.
double ecdf(const std::vector<double>& values, double t);

// TPR = ECDF_match(empirical-quantile_nonmatch(fpr)) on the common score axis.
double empirical_tpr(const std::vector<double>& match,
                     const std::vector<double>& nonmatch, double fpr,
                     Orientation orientation = Orientation::Distance);

std::vector<double> empirical_roc(const std::vector<double>& match,
                                  const std::vector<double>& nonmatch,
                                  const std::vector<double>& fpr_grid,
                                  Orientation orientation = Orientation::Distance);

// Mann-Whitney statistic with half credit for ties.
double empirical_auc(const std::vector<double>& match,
                     const std::vector<double>& nonmatch,
                     Orientation orientation = Orientation::Distance);

// Discrete bins over one item-level covariate. Bin i covers
// [edges[i], edges[i+1]), closed on the right for the final bin.
struct BinSpec {
    std::string covariate;
    std::vector<double> edges;
    std::vector<std::string> labels;  // empty -> "[lo..hi)" labels

    std::size_t bins() const { return edges.size() < 2 ? 0 : edges.size() - 1; }
    void validate() const;
    std::string label(std::size_t bin) const;
    bool contains(std::size_t bin, double value) const;
};

struct BootstrapResult {
    std::string bin_label;
    bool valid = false;
    std::string note;  // diagnostic for missing/degenerate bins
    double point = 0.0;
    Interval ci{0.0, 0.0};
    std::vector<double> replicates;
    std::size_t match_count = 0;
    std::size_t nonmatch_count = 0;
};

enum class BaselineMetric { TprAtFpr, Auc };

// Per bin: point = empirical metric over records whose query AND gallery
// covariate both fall in the bin; CI = 2.5/97.5 percentiles of pair-level
// bootstrap replicates with per-replicate derived seeds.
std::vector<BootstrapResult> binned_metric(
    const PairDataset& ds, const BinSpec& bins, BaselineMetric metric,
    double fpr, std::size_t replicates, std::uint64_t seed,
    Orientation orientation = Orientation::Distance);

}  // namespace covaroc
