#include "covaroc/baseline.hpp"

#include <algorithm>
#include <cmath>

#include "covaroc/error.hpp"
#include "covaroc/rng.hpp"

namespace covaroc {

double empirical_quantile_lower(std::vector<double> values, double p) {
    if (values.empty())
        throw Error(ErrorKind::Precondition, "empirical quantile of empty sample");
    if (!(p >= 0.0 && p <= 1.0))
        throw Error(ErrorKind::Precondition, "quantile level outside [0,1]");
    std::sort(values.begin(), values.end());
    const auto idx = static_cast<std::size_t>(
        std::floor(p * static_cast<double>(values.size() - 1)));
    return values[idx];
}

double ecdf(const std::vector<double>& values, double t) {
    if (values.empty())
        throw Error(ErrorKind::Precondition, "ECDF of empty sample");
    std::size_t count = 0;
    for (double v : values) count += v <= t ? 1 : 0;
    return static_cast<double>(count) / static_cast<double>(values.size());
}

namespace {

std::vector<double> negated(const std::vector<double>& values) {
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = -values[i];
    return out;
}

}  // namespace

double empirical_tpr(const std::vector<double>& match,
                     const std::vector<double>& nonmatch, double fpr,
                     Orientation orientation) {
    if (match.empty() || nonmatch.empty())
        throw Error(ErrorKind::Precondition, "empirical_tpr: empty score stream");
    if (orientation == Orientation::Similarity)
        return empirical_tpr(negated(match), negated(nonmatch), fpr,
                             Orientation::Distance);
    return ecdf(match, empirical_quantile_lower(nonmatch, fpr));
}

std::vector<double> empirical_roc(const std::vector<double>& match,
                                  const std::vector<double>& nonmatch,
                                  const std::vector<double>& fpr_grid,
                                  Orientation orientation) {
    std::vector<double> out;
    out.reserve(fpr_grid.size());
    for (double f : fpr_grid)
        out.push_back(empirical_tpr(match, nonmatch, f, orientation));
    return out;
}

double empirical_auc(const std::vector<double>& match,
                     const std::vector<double>& nonmatch,
                     Orientation orientation) {
    if (match.empty() || nonmatch.empty())
        throw Error(ErrorKind::Precondition, "empirical_auc: empty score stream");
    if (orientation == Orientation::Similarity)
        return empirical_auc(negated(match), negated(nonmatch),
                             Orientation::Distance);
    std::vector<double> sorted_nm = nonmatch;
    std::sort(sorted_nm.begin(), sorted_nm.end());
    double acc = 0.0;
    for (double m : match) {
        const auto lb = std::lower_bound(sorted_nm.begin(), sorted_nm.end(), m);
        const auto ub = std::upper_bound(lb, sorted_nm.end(), m);
        const auto greater = static_cast<double>(sorted_nm.end() - ub);
        const auto ties = static_cast<double>(ub - lb);
        acc += greater + 0.5 * ties;
    }
    return acc / (static_cast<double>(match.size()) *
                  static_cast<double>(sorted_nm.size()));
}

void BinSpec::validate() const {
    if (edges.size() < 2)
        throw Error(ErrorKind::Config, "bin spec needs at least two edges");
    for (std::size_t i = 1; i < edges.size(); ++i)
        if (!(edges[i] > edges[i - 1]))
            throw Error(ErrorKind::Config, "bin edges must be strictly increasing");
    if (!labels.empty() && labels.size() != bins())
        throw Error(ErrorKind::Config, "bin label count does not match bin count");
    if (covariate.empty())
        throw Error(ErrorKind::Config, "bin spec needs a covariate name");
}

std::string BinSpec::label(std::size_t bin) const {
    if (!labels.empty()) return labels[bin];
    // No comma: labels land in CSV cells and the writer does not quote.
    const bool last = bin + 1 == bins();
    return "[" + format_double(edges[bin]) + ".." + format_double(edges[bin + 1]) +
           (last ? "]" : ")");
}

bool BinSpec::contains(std::size_t bin, double value) const {
    const bool last = bin + 1 == bins();
    if (value < edges[bin]) return false;
    return last ? value <= edges[bin + 1] : value < edges[bin + 1];
}

namespace {

struct BinStreams {
    std::vector<double> match;
    std::vector<double> nonmatch;
};

double bin_metric_value(const BinStreams& streams, BaselineMetric metric,
                        double fpr, Orientation orientation) {
    return metric == BaselineMetric::TprAtFpr
               ? empirical_tpr(streams.match, streams.nonmatch, fpr, orientation)
               : empirical_auc(streams.match, streams.nonmatch, orientation);
}

}  // namespace

std::vector<BootstrapResult> binned_metric(const PairDataset& ds,
                                           const BinSpec& bins,
                                           BaselineMetric metric, double fpr,
                                           std::size_t replicates,
                                           std::uint64_t seed,
                                           Orientation orientation) {
    bins.validate();
    if (replicates < 1)
        throw Error(ErrorKind::Config, "replicates must be >= 1");
    if (metric == BaselineMetric::TprAtFpr && !(fpr > 0.0 && fpr < 1.0))
        throw Error(ErrorKind::Config, "fpr must lie in (0,1)");

    // The bin covariate names an item attribute carried as q_<name>/g_<name>
    // pair columns; a bare column of that exact name covers both roles.
    std::size_t q_dim, g_dim;
    const auto q_idx = ds.find_covariate("q_" + bins.covariate);
    const auto g_idx = ds.find_covariate("g_" + bins.covariate);
    if (q_idx && g_idx) {
        q_dim = *q_idx;
        g_dim = *g_idx;
    } else {
        const auto single = ds.find_covariate(bins.covariate);
        if (!single)
            throw Error(ErrorKind::Config,
                        "dataset has neither q_/g_ columns nor a column named '" +
                            bins.covariate + "'");
        q_dim = g_dim = *single;
    }

    std::vector<BootstrapResult> results;
    results.reserve(bins.bins());
    for (std::size_t b = 0; b < bins.bins(); ++b) {
        BootstrapResult res;
        res.bin_label = bins.label(b);

        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < ds.records.size(); ++i) {
            const auto& rec = ds.records[i];
            if (bins.contains(b, rec.covariates[q_dim]) &&
                bins.contains(b, rec.covariates[g_dim]))
                members.push_back(i);
        }

        BinStreams full;
        for (std::size_t i : members) {
            const auto& rec = ds.records[i];
            (rec.match ? full.match : full.nonmatch).push_back(rec.score);
        }
        res.match_count = full.match.size();
        res.nonmatch_count = full.nonmatch.size();
        if (full.match.empty() || full.nonmatch.size() < 2) {
            res.note = "bin has " + std::to_string(full.match.size()) +
                       " match and " + std::to_string(full.nonmatch.size()) +
                       " non-match records; need >= 1 and >= 2";
            results.push_back(std::move(res));
            continue;
        }

        res.point = bin_metric_value(full, metric, fpr, orientation);
        res.replicates.reserve(replicates);
        const std::uint64_t bin_seed = derive_seed(seed, b);
        const std::size_t n = members.size();
        for (std::size_t r = 0; r < replicates; ++r) {
            Rng rng(derive_seed(bin_seed, r));
            BinStreams resampled;
            // A joint pair-level resample can drop a whole stream in tiny
            // bins; redraw deterministically until both streams are usable.
            for (int attempt = 0;; ++attempt) {
                resampled.match.clear();
                resampled.nonmatch.clear();
                for (std::size_t i = 0; i < n; ++i) {
                    const auto& rec = ds.records[members[rng.bounded(n)]];
                    (rec.match ? resampled.match : resampled.nonmatch)
                        .push_back(rec.score);
                }
                if (!resampled.match.empty() && resampled.nonmatch.size() >= 2)
                    break;
                if (attempt >= 100)
                    throw Error(ErrorKind::Numeric,
                                "bootstrap could not draw a usable replicate in bin " +
                                    res.bin_label);
            }
            res.replicates.push_back(
                bin_metric_value(resampled, metric, fpr, orientation));
        }
        res.ci.lo = sample_quantile(res.replicates, 0.025);
        res.ci.hi = sample_quantile(res.replicates, 0.975);
        res.valid = true;
        results.push_back(std::move(res));
    }
    return results;
}

}  // namespace covaroc
