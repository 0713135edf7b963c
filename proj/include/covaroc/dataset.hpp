#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace covaroc {

// Invertible per-dimension z-score transform.
struct Affine {
    double mean = 0.0;
    double std = 1.0;

    double apply(double v) const { return (v - mean) / std; }
    double invert(double z) const { return z * std + mean; }
};

// One row per collected item: identity, feature embedding, native covariates.
struct ItemTable {
    std::vector<std::string> item_ids;
    std::vector<std::string> identities;
    std::vector<Eigen::VectorXd> embeddings;
    std::vector<std::vector<double>> covariates;
    std::vector<std::string> covariate_names;

    std::size_t size() const { return item_ids.size(); }
    void validate() const;
};

// One query/gallery comparison.
struct PairRecord {
    std::string query_id;
    std::string gallery_id;
    double score = 0.0;
    std::vector<double> covariates;
    bool match = false;
    bool diagonal = false;
};

// Match and non-match scores carry separate transforms; covariates share one
// set fitted on the full dataset so both models use the same coordinates.
struct Normalization {
    bool fitted = false;
    Affine match_score;
    Affine nonmatch_score;
    std::vector<Affine> covariates;
};

struct PairDataset {
    std::vector<PairRecord> records;
    std::vector<std::string> covariate_names;
    Normalization normalization;

    std::size_t size() const { return records.size(); }
    std::size_t covariate_index(const std::string& name) const;
    std::optional<std::size_t> find_covariate(const std::string& name) const;

    // Normalized views; raw values always stay in the records.
    double normalized_score(const PairRecord& r) const;
    double normalized_covariate(const PairRecord& r, std::size_t dim) const;
};

enum class DistanceKind { Euclidean, SquaredEuclidean, CosineDistance };
DistanceKind distance_kind_from_name(const std::string& name);
std::string distance_kind_name(DistanceKind kind);

struct InteractionSpec {
    enum class Kind { Product, AbsDiff };
    Kind kind = Kind::Product;
    std::string covariate;  // base name in the item table
};

struct BuildOptions {
    DistanceKind distance = DistanceKind::Euclidean;
    bool keep_diagonal = true;
    bool drop_lower_triangle = false;
    std::vector<InteractionSpec> interactions;
};

// All N x N comparisons in row-major (query, gallery) order.
PairDataset build_pairs(const ItemTable& items, const BuildOptions& options);

struct CsvSchema {
    std::string score_column = "score";
    std::string match_column = "match";
    // Empty means: every column other than ids/score/match is a covariate.
    std::vector<std::string> covariate_columns;
    std::string query_id_column = "query_id";
    std::string gallery_id_column = "gallery_id";
};

PairDataset ingest_pairs_csv(const std::string& path, const CsvSchema& schema = {});
void write_pairs_csv(const PairDataset& ds, const std::string& path);

ItemTable read_items_csv(const std::string& path);

// Fits the score and covariate transforms; record values stay in native
// units and are exposed through the normalized_* views.
PairDataset normalize(PairDataset ds);

struct RangeCondition {
    std::string covariate;
    double lo = 0.0;
    double hi = 0.0;  // inclusive on both ends
};

struct Predicate {
    std::optional<bool> match;
    std::optional<bool> diagonal;
    std::vector<RangeCondition> ranges;
};

// Keeps records satisfying every condition; order and transforms preserved.
PairDataset filter(const PairDataset& ds, const Predicate& predicate);

}  // namespace covaroc
