#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

namespace covaroc {

// Gaussian radial basis features over normalized covariate space.
struct BasisConfig {
    // Per-dimension grid counts. A single entry broadcasts to every
    // dimension; empty means 10 per dimension.
    std::vector<std::size_t> grid;
    double bandwidth = 0.0;       // 0 -> mean grid spacing across dimensions
    double prune_distance = 1.0;  // normalized-covariate units

    std::size_t count_for_dim(std::size_t d, std::size_t dims) const;
};

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

struct BasisSet {
    Eigen::MatrixXd centers;   // rows are center coordinates, includes inactive
    std::vector<bool> active;  // one flag per center row
    double bandwidth = 1.0;

    std::size_t dim() const { return static_cast<std::size_t>(centers.cols()); }
    std::size_t num_centers() const { return static_cast<std::size_t>(centers.rows()); }
    std::size_t num_active() const;

    // Feature count including the trailing constant feature.
    std::size_t num_features() const { return num_active() + 1; }

    // RBF responses over active centers in center order, length num_active().
    Eigen::VectorXd featurize(const Eigen::VectorXd& x) const;

    // featurize with the constant 1.0 appended, length num_features().
    Eigen::VectorXd featurize_const(const Eigen::VectorXd& x) const;

    // Basis with no centers: featurize_const yields just the constant feature.
    static BasisSet constant_only(std::size_t dim);
};

// Cartesian product of per-dimension linspaces spanning the given ranges
// inclusive; a one-point dimension uses the range midpoint. All centers start
// active.
BasisSet place_grid(const BasisConfig& config, const std::vector<Range>& ranges);

// Recompute the active mask: a center is active iff its Euclidean distance to
// the nearest data row is <= prune_distance.
BasisSet prune(const BasisSet& basis, const Eigen::MatrixXd& data,
               double prune_distance);

}  // namespace covaroc
