#include "covaroc/dataset.hpp"

#include <cmath>
#include <set>

#include "covaroc/csv.hpp"
#include "covaroc/error.hpp"
#include "covaroc/stats.hpp"

namespace covaroc {

void ItemTable::validate() const {
    const std::size_t n = item_ids.size();
    if (identities.size() != n || embeddings.size() != n || covariates.size() != n)
        throw Error(ErrorKind::MalformedInput, "item table columns disagree in length");
    if (n == 0) return;
    const Eigen::Index dim = embeddings.front().size();
    if (dim < 1)
        throw Error(ErrorKind::MalformedInput, "embeddings must have length >= 1");
    for (const auto& e : embeddings)
        if (e.size() != dim)
            throw Error(ErrorKind::MalformedInput, "embedding length mismatch");
    for (const auto& c : covariates)
        if (c.size() != covariate_names.size())
            throw Error(ErrorKind::MalformedInput, "covariate length mismatch");
    std::set<std::string> seen;
    for (const auto& id : item_ids)
        if (!seen.insert(id).second)
            throw Error(ErrorKind::MalformedInput, "duplicate item_id '" + id + "'");
}

std::optional<std::size_t> PairDataset::find_covariate(const std::string& name) const {
    for (std::size_t i = 0; i < covariate_names.size(); ++i)
        if (covariate_names[i] == name) return i;
    return std::nullopt;
}

std::size_t PairDataset::covariate_index(const std::string& name) const {
    auto idx = find_covariate(name);
    if (!idx)
        throw Error(ErrorKind::Config, "unknown covariate '" + name + "'");
    return *idx;
}

double PairDataset::normalized_score(const PairRecord& r) const {
    if (!normalization.fitted)
        throw Error(ErrorKind::Precondition, "dataset has no fitted normalization");
    return r.match ? normalization.match_score.apply(r.score)
                   : normalization.nonmatch_score.apply(r.score);
}

double PairDataset::normalized_covariate(const PairRecord& r, std::size_t dim) const {
    if (!normalization.fitted)
        throw Error(ErrorKind::Precondition, "dataset has no fitted normalization");
    return normalization.covariates.at(dim).apply(r.covariates.at(dim));
}

DistanceKind distance_kind_from_name(const std::string& name) {
    if (name == "euclidean") return DistanceKind::Euclidean;
    if (name == "squared-euclidean") return DistanceKind::SquaredEuclidean;
    if (name == "cosine-distance") return DistanceKind::CosineDistance;
    throw Error(ErrorKind::Config, "unknown distance kind '" + name + "'");
}

std::string distance_kind_name(DistanceKind kind) {
    switch (kind) {
        case DistanceKind::Euclidean: return "euclidean";
        case DistanceKind::SquaredEuclidean: return "squared-euclidean";
        case DistanceKind::CosineDistance: return "cosine-distance";
    }
    return "euclidean";
}

namespace {

double pair_score(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                  DistanceKind kind) {
    switch (kind) {
        case DistanceKind::Euclidean: {
            double s = 0.0;
            for (Eigen::Index d = 0; d < a.size(); ++d) {
                const double diff = a[d] - b[d];
                s += diff * diff;
            }
            return std::sqrt(s);
        }
        case DistanceKind::SquaredEuclidean: {
            double s = 0.0;
            for (Eigen::Index d = 0; d < a.size(); ++d) {
                const double diff = a[d] - b[d];
                s += diff * diff;
            }
            return s;
        }
        case DistanceKind::CosineDistance: {
            double dot = 0.0, na = 0.0, nb = 0.0;
            for (Eigen::Index d = 0; d < a.size(); ++d) {
                dot += a[d] * b[d];
                na += a[d] * a[d];
                nb += b[d] * b[d];
            }
            const double denom = std::sqrt(na) * std::sqrt(nb);
            if (denom == 0.0)
                throw Error(ErrorKind::MalformedInput,
                            "cosine distance undefined for zero embedding");
            return 1.0 - dot / denom;
        }
    }
    return 0.0;
}

std::string interaction_name(const InteractionSpec& spec) {
    const char* suffix =
        spec.kind == InteractionSpec::Kind::Product ? "_prod" : "_absdiff";
    return spec.covariate + suffix;
}

}  // namespace

PairDataset build_pairs(const ItemTable& items, const BuildOptions& options) {
    items.validate();
    const std::size_t n = items.size();
    if (n == 0)
        throw Error(ErrorKind::Precondition, "build_pairs: empty item table");

    std::vector<std::size_t> interaction_dims;
    for (const auto& spec : options.interactions) {
        bool found = false;
        for (std::size_t c = 0; c < items.covariate_names.size(); ++c) {
            if (items.covariate_names[c] == spec.covariate) {
                interaction_dims.push_back(c);
                found = true;
                break;
            }
        }
        if (!found)
            throw Error(ErrorKind::Config,
                        "interaction references unknown covariate '" + spec.covariate + "'");
    }

    PairDataset ds;
    for (const auto& name : items.covariate_names) ds.covariate_names.push_back("q_" + name);
    for (const auto& name : items.covariate_names) ds.covariate_names.push_back("g_" + name);
    for (const auto& spec : options.interactions)
        ds.covariate_names.push_back(interaction_name(spec));

    ds.records.reserve(options.keep_diagonal ? n * n : n * (n - 1));
    for (std::size_t q = 0; q < n; ++q) {
        for (std::size_t g = 0; g < n; ++g) {
            if (!options.keep_diagonal && q == g) continue;
            if (options.drop_lower_triangle && g < q) continue;
            PairRecord rec;
            rec.query_id = items.item_ids[q];
            rec.gallery_id = items.item_ids[g];
            rec.score = pair_score(items.embeddings[q], items.embeddings[g],
                                   options.distance);
            if (!std::isfinite(rec.score))
                throw Error(ErrorKind::Numeric, "non-finite pairwise score");
            rec.match = items.identities[q] == items.identities[g];
            rec.diagonal = q == g;
            rec.covariates.reserve(ds.covariate_names.size());
            for (double v : items.covariates[q]) rec.covariates.push_back(v);
            for (double v : items.covariates[g]) rec.covariates.push_back(v);
            for (std::size_t k = 0; k < options.interactions.size(); ++k) {
                const double qv = items.covariates[q][interaction_dims[k]];
                const double gv = items.covariates[g][interaction_dims[k]];
                rec.covariates.push_back(
                    options.interactions[k].kind == InteractionSpec::Kind::Product
                        ? qv * gv
                        : std::abs(qv - gv));
            }
            ds.records.push_back(std::move(rec));
        }
    }
    return ds;
}

PairDataset ingest_pairs_csv(const std::string& path, const CsvSchema& schema) {
    const CsvTable table = read_csv(path);
    const std::size_t score_col = table.require_column(schema.score_column);
    const std::size_t match_col = table.require_column(schema.match_column);

    const auto qid_col = table.column(schema.query_id_column);
    const auto gid_col = table.column(schema.gallery_id_column);

    std::vector<std::size_t> cov_cols;
    PairDataset ds;
    if (schema.covariate_columns.empty()) {
        for (std::size_t i = 0; i < table.header.size(); ++i) {
            if (i == score_col || i == match_col) continue;
            if (qid_col && i == *qid_col) continue;
            if (gid_col && i == *gid_col) continue;
            cov_cols.push_back(i);
            ds.covariate_names.push_back(table.header[i]);
        }
    } else {
        for (const auto& name : schema.covariate_columns) {
            cov_cols.push_back(table.require_column(name));
            ds.covariate_names.push_back(name);
        }
    }

    if (table.rows.empty())
        throw Error(ErrorKind::EmptyDataset, path + ": no data rows");

    ds.records.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = table.line_numbers[r];
        PairRecord rec;
        rec.query_id = qid_col ? row[*qid_col] : "q" + std::to_string(r);
        rec.gallery_id = gid_col ? row[*gid_col] : "g" + std::to_string(r);
        rec.score = parse_cell_double(row[score_col], schema.score_column, line);
        if (!std::isfinite(rec.score))
            throw Error(ErrorKind::RowParse,
                        "line " + std::to_string(line) + ": non-finite score");
        rec.match = parse_cell_bool(row[match_col], schema.match_column, line);
        rec.diagonal = rec.query_id == rec.gallery_id;
        if (rec.diagonal && !rec.match)
            throw Error(ErrorKind::RowParse,
                        "line " + std::to_string(line) +
                            ": diagonal record (query_id == gallery_id) must be a match");
        rec.covariates.reserve(cov_cols.size());
        for (std::size_t k = 0; k < cov_cols.size(); ++k)
            rec.covariates.push_back(
                parse_cell_double(row[cov_cols[k]], ds.covariate_names[k], line));
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

void write_pairs_csv(const PairDataset& ds, const std::string& path) {
    std::vector<std::string> header = {"query_id", "gallery_id", "score", "match"};
    for (const auto& name : ds.covariate_names) header.push_back(name);
    CsvWriter out(std::move(header));
    std::vector<std::string> cells;
    for (const auto& rec : ds.records) {
        cells.clear();
        cells.push_back(rec.query_id);
        cells.push_back(rec.gallery_id);
        cells.push_back(format_double(rec.score));
        cells.push_back(rec.match ? "1" : "0");
        for (double v : rec.covariates) cells.push_back(format_double(v));
        out.add_row(cells);
    }
    out.write(path);
}

ItemTable read_items_csv(const std::string& path) {
    const CsvTable table = read_csv(path);
    const std::size_t id_col = table.require_column("item_id");
    const std::size_t ident_col = table.require_column("identity");

    std::vector<std::size_t> embed_cols;
    for (std::size_t d = 0;; ++d) {
        auto col = table.column("e" + std::to_string(d));
        if (!col) break;
        embed_cols.push_back(*col);
    }
    if (embed_cols.empty())
        throw Error(ErrorKind::Schema, path + ": no embedding columns (e0, e1, ...)");

    ItemTable items;
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        if (i == id_col || i == ident_col) continue;
        bool is_embed = false;
        for (std::size_t c : embed_cols) is_embed |= (c == i);
        if (!is_embed) items.covariate_names.push_back(table.header[i]);
    }

    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = table.line_numbers[r];
        items.item_ids.push_back(row[id_col]);
        items.identities.push_back(row[ident_col]);
        Eigen::VectorXd e(embed_cols.size());
        for (std::size_t d = 0; d < embed_cols.size(); ++d)
            e[static_cast<Eigen::Index>(d)] =
                parse_cell_double(row[embed_cols[d]], "e" + std::to_string(d), line);
        items.embeddings.push_back(std::move(e));
        std::vector<double> covs;
        std::size_t k = 0;
        for (std::size_t i = 0; i < table.header.size(); ++i) {
            if (i == id_col || i == ident_col) continue;
            bool is_embed = false;
            for (std::size_t c : embed_cols) is_embed |= (c == i);
            if (is_embed) continue;
            covs.push_back(parse_cell_double(row[i], items.covariate_names[k++], line));
        }
        items.covariates.push_back(std::move(covs));
    }
    items.validate();
    return items;
}

namespace {

Affine fit_affine(const std::vector<double>& values, const std::string& what) {
    const double m = mean(values);
    const double s = population_std(values);
    if (!(s > 0.0))
        throw Error(ErrorKind::DegenerateDimension,
                    "constant dimension '" + what + "' (std = 0)");
    return {m, s};
}

}  // namespace

PairDataset normalize(PairDataset ds) {
    std::vector<double> match_scores, nonmatch_scores;
    for (const auto& rec : ds.records)
        (rec.match ? match_scores : nonmatch_scores).push_back(rec.score);
    if (match_scores.empty())
        throw Error(ErrorKind::Precondition, "normalize: no match records");
    if (nonmatch_scores.empty())
        throw Error(ErrorKind::Precondition, "normalize: no non-match records");

    Normalization norms;
    norms.match_score = fit_affine(match_scores, "match score");
    norms.nonmatch_score = fit_affine(nonmatch_scores, "non-match score");
    norms.covariates.resize(ds.covariate_names.size());
    std::vector<double> column(ds.records.size());
    for (std::size_t d = 0; d < ds.covariate_names.size(); ++d) {
        for (std::size_t i = 0; i < ds.records.size(); ++i)
            column[i] = ds.records[i].covariates[d];
        norms.covariates[d] = fit_affine(column, ds.covariate_names[d]);
    }
    norms.fitted = true;
    ds.normalization = norms;
    return ds;
}

PairDataset filter(const PairDataset& ds, const Predicate& predicate) {
    std::vector<std::size_t> range_dims;
    range_dims.reserve(predicate.ranges.size());
    for (const auto& cond : predicate.ranges)
        range_dims.push_back(ds.covariate_index(cond.covariate));

    PairDataset out;
    out.covariate_names = ds.covariate_names;
    out.normalization = ds.normalization;
    for (const auto& rec : ds.records) {
        if (predicate.match && rec.match != *predicate.match) continue;
        if (predicate.diagonal && rec.diagonal != *predicate.diagonal) continue;
        bool keep = true;
        for (std::size_t k = 0; k < predicate.ranges.size(); ++k) {
            const double v = rec.covariates[range_dims[k]];
            if (v < predicate.ranges[k].lo || v > predicate.ranges[k].hi) {
                keep = false;
                break;
            }
        }
        if (keep) out.records.push_back(rec);
    }
    return out;
}

}  // namespace covaroc
