#include <cmath>
#include <set>

#include "doctest.h"

#include "covaroc/csv.hpp"
#include "covaroc/dataset.hpp"
#include "covaroc/error.hpp"

#include "test_util.hpp"

using namespace covaroc;

namespace {

ItemTable three_items() {
    ItemTable items;
    items.item_ids = {"a", "b", "c"};
    items.identities = {"p1", "p1", "p2"};
    items.embeddings = {Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(3.0, 4.0),
                        Eigen::Vector2d(1.0, 1.0)};
    items.covariates = {{20.0}, {30.0}, {40.0}};
    items.covariate_names = {"age"};
    return items;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("build_pairs yields N^2 records with match and diagonal flags") {
    const ItemTable items = three_items();
    const PairDataset ds = build_pairs(items, {});
    CHECK(ds.size() == 9);
    CHECK(ds.covariate_names == std::vector<std::string>{"q_age", "g_age"});

    // Self-comparison: zero distance, match, diagonal.
    const PairRecord& aa = ds.records[0];
    CHECK(aa.query_id == "a");
    CHECK(aa.gallery_id == "a");
    CHECK(aa.score == 0.0);
    CHECK(aa.match);
    CHECK(aa.diagonal);

    // 3-4-5 triangle.
    const PairRecord& ab = ds.records[1];
    CHECK(ab.score == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(ab.match);  // same identity p1
    CHECK_FALSE(ab.diagonal);

    // Cross-identity pair is a non-match.
    const PairRecord& ac = ds.records[2];
    CHECK_FALSE(ac.match);
    CHECK(ac.covariates == std::vector<double>{20.0, 40.0});

    int matches = 0;
    for (const auto& r : ds.records) matches += r.match;
    CHECK(matches == 5);  // 3 diagonal + (a,b) + (b,a)
}

TEST_CASE("build_pairs drops the diagonal when asked") {
    BuildOptions opt;
    opt.keep_diagonal = false;
    const PairDataset ds = build_pairs(three_items(), opt);
    CHECK(ds.size() == 6);
    for (const auto& r : ds.records) CHECK_FALSE(r.diagonal);
}

TEST_CASE("symmetric distances produce a symmetric score matrix") {
    for (DistanceKind kind :
         {DistanceKind::Euclidean, DistanceKind::SquaredEuclidean,
          DistanceKind::CosineDistance}) {
        ItemTable items = three_items();
        items.embeddings = {Eigen::Vector2d(0.5, 2.0), Eigen::Vector2d(3.0, 4.0),
                            Eigen::Vector2d(1.0, -1.0)};
        BuildOptions opt;
        opt.distance = kind;
        const PairDataset ds = build_pairs(items, opt);
        const std::size_t n = items.size();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                CHECK(ds.records[i * n + j].score == ds.records[j * n + i].score);
    }
}

TEST_CASE("match and non-match filters partition the records") {
    const PairDataset ds = build_pairs(three_items(), {});
    Predicate m;
    m.match = true;
    Predicate nm;
    nm.match = false;
    CHECK(filter(ds, m).size() + filter(ds, nm).size() == ds.size());
}

TEST_CASE("interactions add derived covariate columns") {
    BuildOptions opt;
    opt.interactions = {{InteractionSpec::Kind::Product, "age"},
                        {InteractionSpec::Kind::AbsDiff, "age"}};
    const PairDataset ds = build_pairs(three_items(), opt);
    CHECK(ds.covariate_names ==
          std::vector<std::string>{"q_age", "g_age", "age_prod", "age_absdiff"});
    const PairRecord& ab = ds.records[1];  // ages 20, 30
    CHECK(ab.covariates[2] == 600.0);
    CHECK(ab.covariates[3] == 10.0);

    BuildOptions bad;
    bad.interactions = {{InteractionSpec::Kind::Product, "height"}};
    CHECK_THROWS_AS(build_pairs(three_items(), bad), Error);
}

TEST_CASE("item table validation rejects inconsistent shapes") {
    ItemTable items = three_items();
    items.embeddings[1] = Eigen::Vector3d(1.0, 2.0, 3.0);
    CHECK_THROWS_AS(build_pairs(items, {}), Error);

    ItemTable dup = three_items();
    dup.item_ids[1] = "a";
    CHECK_THROWS_AS(build_pairs(dup, {}), Error);

    CHECK_THROWS_AS(distance_kind_from_name("manhattan"), Error);
    CHECK(distance_kind_from_name("euclidean") == DistanceKind::Euclidean);
    CHECK(distance_kind_from_name("squared-euclidean") ==
          DistanceKind::SquaredEuclidean);
    CHECK(distance_kind_from_name("cosine-distance") ==
          DistanceKind::CosineDistance);
}

TEST_CASE("ingest_pairs_csv maps columns and reports row errors") {
    testutil::TempDir dir("ingest");
    const std::string path = dir.file("pairs.csv");
    testutil::write_file(path,
                         "score,match,q_age,g_age\n"
                         "1.5,1,20,30\n"
                         "2.5,0,20,40\n"
                         "0.5,true,25,25\n"
                         "3.5,false,30,20\n");
    const PairDataset ds = ingest_pairs_csv(path);
    CHECK(ds.size() == 4);
    CHECK(ds.covariate_names == std::vector<std::string>{"q_age", "g_age"});
    CHECK(ds.records[0].score == 1.5);
    CHECK(ds.records[0].match);
    CHECK_FALSE(ds.records[1].match);
    CHECK(ds.records[2].match);
    CHECK(ds.records[3].covariates == std::vector<double>{30.0, 20.0});

    SUBCASE("match value outside the boolean domain carries the line number") {
        testutil::write_file(path, "score,match\n1.0,2\n");
        try {
            ingest_pairs_csv(path);
            CHECK(false);
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::RowParse);
            CHECK(std::string(e.what()).find("2") != std::string::npos);
        }
    }
    SUBCASE("empty data section") {
        testutil::write_file(path, "score,match\n");
        try {
            ingest_pairs_csv(path);
            CHECK(false);
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::EmptyDataset);
        }
    }
    SUBCASE("missing column is a schema error naming the column") {
        testutil::write_file(path, "score,q_age\n1.0,20\n");
        try {
            ingest_pairs_csv(path);
            CHECK(false);
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Schema);
            CHECK(std::string(e.what()).find("match") != std::string::npos);
        }
    }
    SUBCASE("non-finite score is rejected") {
        testutil::write_file(path, "score,match\nnan,1\n");
        CHECK_THROWS_AS(ingest_pairs_csv(path), Error);
        testutil::write_file(path, "score,match\ninf,0\n");
        CHECK_THROWS_AS(ingest_pairs_csv(path), Error);
    }
}

TEST_CASE("pair CSV round-trips through write and ingest") {
    const PairDataset ds = build_pairs(three_items(), {});
    testutil::TempDir dir("roundtrip");
    const std::string path = dir.file("pairs.csv");
    write_pairs_csv(ds, path);
    const PairDataset back = ingest_pairs_csv(path);
    REQUIRE(back.size() == ds.size());
    CHECK(back.covariate_names == ds.covariate_names);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(back.records[i].query_id == ds.records[i].query_id);
        CHECK(back.records[i].gallery_id == ds.records[i].gallery_id);
        CHECK(back.records[i].score == ds.records[i].score);  // exact
        CHECK(back.records[i].match == ds.records[i].match);
        CHECK(back.records[i].covariates == ds.records[i].covariates);
        CHECK(back.records[i].diagonal == ds.records[i].diagonal);
    }
}

TEST_CASE("normalize fits separate score streams and shared covariates") {
    PairDataset ds;
    ds.covariate_names = {"x"};
    auto rec = [](double score, bool match, double x) {
        PairRecord r;
        r.query_id = "q";
        r.gallery_id = "g";
        r.score = score;
        r.match = match;
        r.covariates = {x};
        return r;
    };
    ds.records = {rec(1.0, true, 0.0), rec(3.0, true, 2.0), rec(10.0, false, 4.0),
                  rec(14.0, false, 6.0)};
    const PairDataset norm = normalize(ds);
    REQUIRE(norm.normalization.fitted);
    // Match scores {1,3}: two-point z-score gives -1, +1.
    CHECK(norm.normalized_score(norm.records[0]) == doctest::Approx(-1.0));
    CHECK(norm.normalized_score(norm.records[1]) == doctest::Approx(1.0));
    // Non-match scores {10,14} likewise.
    CHECK(norm.normalized_score(norm.records[2]) == doctest::Approx(-1.0));
    CHECK(norm.normalized_score(norm.records[3]) == doctest::Approx(1.0));
    // Raw values untouched.
    CHECK(norm.records[0].score == 1.0);

    // Normalized covariate stream has mean 0, std 1 within 1e-6.
    double s = 0.0, ss = 0.0;
    for (const auto& r : norm.records) {
        const double z = norm.normalized_covariate(r, 0);
        s += z;
        ss += z * z;
    }
    const double m = s / 4.0;
    CHECK(std::abs(m) < 1e-6);
    CHECK(std::abs(std::sqrt(ss / 4.0 - m * m) - 1.0) < 1e-6);

    // Inverse transform reproduces native units within 1e-12 relative.
    const Affine& cx = norm.normalization.covariates[0];
    for (const auto& r : norm.records) {
        const double back = cx.invert(cx.apply(r.covariates[0]));
        CHECK(back == doctest::Approx(r.covariates[0]).epsilon(1e-12));
    }
}

TEST_CASE("normalize rejects constant covariates by dimension name") {
    PairDataset ds;
    ds.covariate_names = {"x", "flat"};
    for (int i = 0; i < 4; ++i) {
        PairRecord r;
        r.score = i;
        r.match = i < 2;
        r.covariates = {static_cast<double>(i), 5.0};
        ds.records.push_back(r);
    }
    try {
        normalize(ds);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DegenerateDimension);
        CHECK(std::string(e.what()).find("flat") != std::string::npos);
    }
}

TEST_CASE("normalize requires both score streams") {
    PairDataset ds;
    PairRecord r;
    r.score = 1.0;
    r.match = true;
    ds.records = {r, r};
    CHECK_THROWS_AS(normalize(ds), Error);  // no non-match records
}

TEST_CASE("filter keeps order and understands ranges and flags") {
    const PairDataset ds = build_pairs(three_items(), {});

    Predicate diag;
    diag.diagonal = true;
    CHECK(filter(ds, diag).size() == 3);

    Predicate range;
    range.ranges = {{"q_age", 25.0, 45.0}};  // items b (30), c (40) as query
    const PairDataset sub = filter(ds, range);
    CHECK(sub.size() == 6);
    for (const auto& r : sub.records) {
        CHECK(r.covariates[0] >= 25.0);
        CHECK(r.covariates[0] <= 45.0);
    }
    // Order preserved: scores appear in original relative order.
    std::size_t last = 0;
    for (const auto& r : sub.records) {
        std::size_t pos = 0;
        for (; pos < ds.size(); ++pos)
            if (ds.records[pos].query_id == r.query_id &&
                ds.records[pos].gallery_id == r.gallery_id)
                break;
        CHECK(pos >= last);
        last = pos;
    }

    Predicate bad;
    bad.ranges = {{"height", 0.0, 1.0}};
    CHECK_THROWS_AS(filter(ds, bad), Error);
}

TEST_CASE("read_items_csv parses embeddings and covariates") {
    testutil::TempDir dir("items");
    const std::string path = dir.file("items.csv");
    testutil::write_file(path,
                         "item_id,identity,e0,e1,age\n"
                         "a,p1,0,0,20\n"
                         "b,p1,3,4,30\n");
    const ItemTable items = read_items_csv(path);
    CHECK(items.size() == 2);
    CHECK(items.embeddings[1](0) == 3.0);
    CHECK(items.embeddings[1](1) == 4.0);
    CHECK(items.covariate_names == std::vector<std::string>{"age"});
    CHECK(items.covariates[1] == std::vector<double>{30.0});
}

}  // TEST_SUITE
