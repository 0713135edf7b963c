#include "covaroc/basis.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "covaroc/error.hpp"

namespace covaroc {

std::size_t BasisConfig::count_for_dim(std::size_t d, std::size_t dims) const {
    if (grid.empty()) return 10;
    if (grid.size() == 1) return grid[0];
    if (grid.size() != dims)
        throw Error(ErrorKind::Config,
                    "basis.grid has " + std::to_string(grid.size()) +
                        " entries for " + std::to_string(dims) + " covariates");
    return grid[d];
}

std::size_t BasisSet::num_active() const {
    std::size_t n = 0;
    for (bool a : active) n += a ? 1 : 0;
    return n;
}

Eigen::VectorXd BasisSet::featurize(const Eigen::VectorXd& x) const {
    if (x.size() != centers.cols())
        throw Error(ErrorKind::MalformedInput,
                    "featurize: point has dimension " + std::to_string(x.size()) +
                        ", basis expects " + std::to_string(centers.cols()));
    Eigen::VectorXd phi(static_cast<Eigen::Index>(num_active()));
    const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
    Eigen::Index out = 0;
    for (Eigen::Index k = 0; k < centers.rows(); ++k) {
        if (!active[static_cast<std::size_t>(k)]) continue;
        const double d2 = (centers.row(k).transpose() - x).squaredNorm();
        phi[out++] = std::exp(-d2 * inv);
    }
    return phi;
}

Eigen::VectorXd BasisSet::featurize_const(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd base = featurize(x);
    Eigen::VectorXd phi(base.size() + 1);
    phi.head(base.size()) = base;
    phi[base.size()] = 1.0;
    return phi;
}

BasisSet BasisSet::constant_only(std::size_t dim) {
    BasisSet basis;
    basis.centers.resize(0, static_cast<Eigen::Index>(dim));
    basis.bandwidth = 1.0;
    return basis;
}

BasisSet place_grid(const BasisConfig& config, const std::vector<Range>& ranges) {
    if (ranges.empty())
        throw Error(ErrorKind::Precondition, "place_grid: need at least one dimension");
    const std::size_t dims = ranges.size();

    std::vector<std::vector<double>> axes(dims);
    double spacing_sum = 0.0;
    std::size_t spacing_count = 0;
    for (std::size_t d = 0; d < dims; ++d) {
        const std::size_t count = config.count_for_dim(d, dims);
        if (count == 0)
            throw Error(ErrorKind::Config, "basis.grid entries must be >= 1");
        const double lo = ranges[d].lo;
        const double hi = ranges[d].hi;
        if (!(hi > lo))
            throw Error(ErrorKind::DegenerateRange,
                        "zero-width covariate range in dimension " + std::to_string(d));
        if (count == 1) {
            axes[d].push_back(0.5 * (lo + hi));
        } else {
            const double step = (hi - lo) / static_cast<double>(count - 1);
            spacing_sum += step;
            ++spacing_count;
            for (std::size_t i = 0; i < count; ++i)
                axes[d].push_back(lo + step * static_cast<double>(i));
        }
    }

    std::size_t total = 1;
    for (const auto& axis : axes) total *= axis.size();

    BasisSet basis;
    basis.centers.resize(static_cast<Eigen::Index>(total),
                         static_cast<Eigen::Index>(dims));
    std::vector<std::size_t> index(dims, 0);
    for (std::size_t row = 0; row < total; ++row) {
        for (std::size_t d = 0; d < dims; ++d)
            basis.centers(static_cast<Eigen::Index>(row),
                          static_cast<Eigen::Index>(d)) = axes[d][index[d]];
        for (std::size_t d = dims; d-- > 0;) {
            if (++index[d] < axes[d].size()) break;
            index[d] = 0;
        }
    }
    basis.active.assign(total, true);
    basis.bandwidth = config.bandwidth > 0.0
                          ? config.bandwidth
                          : (spacing_count > 0
                                 ? spacing_sum / static_cast<double>(spacing_count)
                                 : 1.0);
    return basis;
}

BasisSet prune(const BasisSet& basis, const Eigen::MatrixXd& data,
               double prune_distance) {
    if (data.rows() == 0)
        throw Error(ErrorKind::Precondition, "prune: empty data");
    if (data.cols() != basis.centers.cols())
        throw Error(ErrorKind::Precondition, "prune: dimension mismatch");
    const double limit2 = prune_distance * prune_distance;
    BasisSet out = basis;
    std::size_t remaining = 0;
    for (Eigen::Index k = 0; k < basis.centers.rows(); ++k) {
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < data.rows(); ++i) {
            const double d2 = (data.row(i) - basis.centers.row(k)).squaredNorm();
            if (d2 < best) best = d2;
            if (best <= limit2) break;
        }
        const bool keep = best <= limit2;
        out.active[static_cast<std::size_t>(k)] = keep;
        remaining += keep ? 1 : 0;
    }
    if (remaining == 0)
        throw Error(ErrorKind::EmptyBasis,
                    "all basis centers lie farther than " +
                        std::to_string(prune_distance) +
                        " from the data; increase prune_distance");
    return out;
}

}  // namespace covaroc
