#include <cmath>

#include "doctest.h"

#include "covaroc/basis.hpp"
#include "covaroc/error.hpp"
#include "covaroc/rng.hpp"

#include "test_oracles.hpp"

using namespace covaroc;

namespace {

std::vector<bool> brute_force_mask(const BasisSet& b, const Eigen::MatrixXd& data,
                                   double limit) {
    std::vector<bool> mask(b.num_centers(), false);
    for (std::size_t c = 0; c < b.num_centers(); ++c) {
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index r = 0; r < data.rows(); ++r)
            best = std::min(best, (data.row(r).transpose() -
                                   b.centers.row(static_cast<Eigen::Index>(c))
                                       .transpose())
                                      .norm());
        mask[c] = best <= limit;
    }
    return mask;
}

}  // namespace

TEST_SUITE("basis") {

TEST_CASE("place_grid spans ranges inclusively") {
    BasisConfig cfg;
    cfg.grid = {3};
    const BasisSet b = place_grid(cfg, {{-1.0, 1.0}});
    REQUIRE(b.num_centers() == 3);
    CHECK(b.centers(0, 0) == -1.0);
    CHECK(b.centers(1, 0) == 0.0);
    CHECK(b.centers(2, 0) == 1.0);
    CHECK(b.num_active() == 3);
    CHECK(b.num_features() == 4);  // + constant
}

TEST_CASE("place_grid builds Cartesian products") {
    BasisConfig cfg;
    cfg.grid = {2, 2};
    const BasisSet b = place_grid(cfg, {{0.0, 1.0}, {0.0, 1.0}});
    REQUIRE(b.num_centers() == 4);
    // Unit-square corners, in odometer order.
    CHECK(b.centers(0, 0) == 0.0);
    CHECK(b.centers(0, 1) == 0.0);
    CHECK(b.centers(3, 0) == 1.0);
    CHECK(b.centers(3, 1) == 1.0);

    BasisConfig ten;
    ten.grid = {10};
    const BasisSet big = place_grid(ten, {{0.0, 1.0}, {0.0, 1.0}});
    CHECK(big.num_centers() == 100);  // broadcast single count
}

TEST_CASE("grid count one places the midpoint; zero-width range fails") {
    BasisConfig cfg;
    cfg.grid = {1};
    const BasisSet b = place_grid(cfg, {{2.0, 6.0}});
    REQUIRE(b.num_centers() == 1);
    CHECK(b.centers(0, 0) == 4.0);

    CHECK_THROWS_AS(place_grid(cfg, {{3.0, 3.0}}), Error);
    try {
        place_grid(cfg, {{3.0, 3.0}});
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DegenerateRange);
    }
}

TEST_CASE("default bandwidth is the mean grid spacing") {
    BasisConfig cfg;
    cfg.grid = {3, 5};
    const BasisSet b = place_grid(cfg, {{0.0, 2.0}, {0.0, 2.0}});
    // Spacings: 1.0 and 0.5 -> mean 0.75.
    CHECK(b.bandwidth == doctest::Approx(0.75).epsilon(1e-15));

    BasisConfig fixed = cfg;
    fixed.bandwidth = 0.3;
    CHECK(place_grid(fixed, {{0.0, 2.0}, {0.0, 2.0}}).bandwidth == 0.3);
}

TEST_CASE("prune keeps centers within reach of data") {
    BasisSet b;
    b.centers.resize(2, 1);
    b.centers << 0.0, 10.0;
    b.active = {true, true};
    b.bandwidth = 1.0;
    Eigen::MatrixXd data(1, 1);
    data << 0.1;
    const BasisSet pruned = prune(b, data, 1.0);
    CHECK(pruned.active == std::vector<bool>{true, false});
    CHECK(pruned.num_active() == 1);
    CHECK(pruned.num_centers() == 2);  // centers retained, only mask changes
}

TEST_CASE("prune with covering data changes nothing") {
    BasisConfig cfg;
    cfg.grid = {4};
    const BasisSet b = place_grid(cfg, {{0.0, 3.0}});
    Eigen::MatrixXd data(4, 1);
    data << 0.0, 1.0, 2.0, 3.0;
    const BasisSet pruned = prune(b, data, 0.5);
    CHECK(pruned.active == b.active);
}

TEST_CASE("prune matches the brute-force distance oracle on diagonal data") {
    BasisConfig cfg;
    cfg.grid = {5, 5};
    const BasisSet b = place_grid(cfg, {{-2.0, 2.0}, {-2.0, 2.0}});
    Rng rng(11);
    Eigen::MatrixXd data(200, 2);
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        const double x = rng.uniform(-2.0, 2.0);
        data(i, 0) = x;
        data(i, 1) = x + 0.05 * rng.normal();  // concentrated near the diagonal
    }
    const BasisSet pruned = prune(b, data, 1.0);
    CHECK(pruned.active == brute_force_mask(b, data, 1.0));
    // Off-diagonal corners (-2,2) and (2,-2) must be gone.
    CHECK_FALSE(pruned.active[4]);
    CHECK_FALSE(pruned.active[20]);
    CHECK(pruned.num_active() >= 1);
}

TEST_CASE("prune is idempotent and monotone in the radius") {
    BasisConfig cfg;
    cfg.grid = {6, 6};
    const BasisSet b = place_grid(cfg, {{0.0, 1.0}, {0.0, 1.0}});
    Rng rng(5);
    Eigen::MatrixXd data(40, 2);
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        data(i, 0) = rng.uniform();
        data(i, 1) = std::pow(rng.uniform(), 3.0);
    }
    const BasisSet once = prune(b, data, 0.25);
    const BasisSet twice = prune(once, data, 0.25);
    CHECK(once.active == twice.active);

    const BasisSet wide = prune(b, data, 0.6);
    for (std::size_t c = 0; c < b.num_centers(); ++c)
        if (once.active[c]) CHECK(wide.active[c]);
}

TEST_CASE("prune rejects an empty result") {
    BasisConfig cfg;
    cfg.grid = {3};
    const BasisSet b = place_grid(cfg, {{0.0, 1.0}});
    Eigen::MatrixXd far(1, 1);
    far << 100.0;
    try {
        prune(b, far, 1.0);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptyBasis);
        CHECK(std::string(e.what()).find("prune_distance") != std::string::npos);
    }
}

TEST_CASE("featurize evaluates the Gaussian kernel over active centers") {
    BasisConfig cfg;
    cfg.grid = {3};
    cfg.bandwidth = 1.0;
    const BasisSet b = place_grid(cfg, {{-1.0, 1.0}});

    Eigen::VectorXd at_center(1);
    at_center << 0.0;
    const Eigen::VectorXd phi = b.featurize(at_center);
    REQUIRE(phi.size() == 3);
    CHECK(phi(1) == 1.0);  // zero distance
    // |x - c| = 1 = bandwidth -> exp(-1/2).
    CHECK(phi(0) == doctest::Approx(oracle::kExpMinusHalf).epsilon(1e-14));
    CHECK(phi(2) == doctest::Approx(oracle::kExpMinusHalf).epsilon(1e-14));

    Eigen::VectorXd far(1);
    far << 10.0;
    const Eigen::VectorXd tail = b.featurize(far);
    for (Eigen::Index k = 0; k < tail.size(); ++k) {
        CHECK(tail(k) <= std::exp(-0.5 * 81.0));  // nearest center 9 bandwidths
        CHECK(tail(k) > 0.0);
    }

    const Eigen::VectorXd with_const = b.featurize_const(at_center);
    REQUIRE(with_const.size() == 4);
    CHECK(with_const(3) == 1.0);

    Eigen::VectorXd wrong(2);
    wrong << 0.0, 0.0;
    CHECK_THROWS_AS(b.featurize(wrong), Error);
}

TEST_CASE("featurize skips pruned centers but keeps center order") {
    BasisSet b;
    b.centers.resize(3, 1);
    b.centers << -1.0, 0.0, 1.0;
    b.active = {true, false, true};
    b.bandwidth = 1.0;
    Eigen::VectorXd x(1);
    x << 1.0;
    const Eigen::VectorXd phi = b.featurize(x);
    REQUIRE(phi.size() == 2);
    CHECK(phi(0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));  // c=-1
    CHECK(phi(1) == 1.0);                                             // c=+1
}

TEST_CASE("featurize is bit-stable") {
    BasisConfig cfg;
    cfg.grid = {4, 4};
    const BasisSet b = place_grid(cfg, {{0.0, 1.0}, {-1.0, 1.0}});
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
        Eigen::VectorXd x(2);
        x << rng.uniform(-2, 2), rng.uniform(-2, 2);
        const Eigen::VectorXd a = b.featurize(x);
        const Eigen::VectorXd c = b.featurize(x);
        for (Eigen::Index k = 0; k < a.size(); ++k) {
            CHECK(a(k) == c(k));
            CHECK(a(k) > 0.0);
            CHECK(a(k) <= 1.0);
        }
    }
}

TEST_CASE("constant_only basis has just the constant feature") {
    const BasisSet b = BasisSet::constant_only(0);
    CHECK(b.num_active() == 0);
    CHECK(b.num_features() == 1);
    const Eigen::VectorXd phi = b.featurize_const(Eigen::VectorXd(0));
    REQUIRE(phi.size() == 1);
    CHECK(phi(0) == 1.0);
}

TEST_CASE("grid count mismatch with dimensions is a config error") {
    BasisConfig cfg;
    cfg.grid = {3, 4, 5};
    CHECK_THROWS_AS(place_grid(cfg, {{0.0, 1.0}, {0.0, 1.0}}), Error);
}

}  // TEST_SUITE
