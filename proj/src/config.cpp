#include "covaroc/config.hpp"

#include <algorithm>
#include <fstream>

#include "covaroc/error.hpp"
#include "covaroc/model_io.hpp"

namespace covaroc {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::vector<std::string>& allowed,
                const std::string& where) {
    if (!j.is_object())
        throw Error(ErrorKind::Schema, where + " must be a JSON object");
    for (const auto& item : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
            throw Error(ErrorKind::Schema,
                        "unknown key '" + item.key() + "' in " + where);
    }
}

std::vector<std::string> string_list(const json& j, const std::string& where) {
    if (!j.is_array())
        throw Error(ErrorKind::Schema, where + " must be an array of strings");
    std::vector<std::string> out;
    for (const auto& v : j) {
        if (!v.is_string())
            throw Error(ErrorKind::Schema, where + " must be an array of strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

void parse_dataset(const json& j, RunConfig& config) {
    check_keys(j,
               {"source", "score_column", "match_column", "covariate_columns",
                "query_id_column", "gallery_id_column"},
               "dataset");
    config.dataset_source = j.value("source", std::string{});
    config.schema.score_column = j.value("score_column", config.schema.score_column);
    config.schema.match_column = j.value("match_column", config.schema.match_column);
    if (j.contains("covariate_columns"))
        config.schema.covariate_columns =
            string_list(j["covariate_columns"], "dataset.covariate_columns");
    config.schema.query_id_column =
        j.value("query_id_column", config.schema.query_id_column);
    config.schema.gallery_id_column =
        j.value("gallery_id_column", config.schema.gallery_id_column);
}

void parse_simulate(const json& j, RunConfig& config) {
    check_keys(j, {"preset", "truth", "n_match", "n_nonmatch", "oracle"},
               "simulate");
    config.simulate.preset = j.value("preset", std::string{});
    if (j.contains("truth"))
        config.simulate.truth = truth_from_json(j["truth"]);
    if (j.contains("n_match"))
        config.simulate.n_match = j["n_match"].get<std::size_t>();
    if (j.contains("n_nonmatch"))
        config.simulate.n_nonmatch = j["n_nonmatch"].get<std::size_t>();
    if (j.contains("oracle")) {
        const json& o = j["oracle"];
        check_keys(o, {"enabled", "grid", "metric", "fpr", "n_per_point"},
                   "simulate.oracle");
        config.simulate.oracle.enabled = o.value("enabled", true);
        config.simulate.oracle.grid =
            o.value("grid", config.simulate.oracle.grid);
        config.simulate.oracle.metric =
            o.value("metric", config.simulate.oracle.metric);
        config.simulate.oracle.fpr = o.value("fpr", config.simulate.oracle.fpr);
        config.simulate.oracle.n_per_point =
            o.value("n_per_point", config.simulate.oracle.n_per_point);
    }
}

void parse_basis(const json& j, RunConfig& config) {
    check_keys(j, {"grid", "bandwidth", "prune_distance"}, "basis");
    if (j.contains("grid")) {
        const json& g = j["grid"];
        config.basis.grid.clear();
        if (g.is_number_unsigned() || g.is_number_integer()) {
            config.basis.grid.push_back(g.get<std::size_t>());
        } else if (g.is_array()) {
            for (const auto& v : g) config.basis.grid.push_back(v.get<std::size_t>());
        } else {
            throw Error(ErrorKind::Schema,
                        "basis.grid must be an integer or integer array");
        }
    }
    config.basis.bandwidth = j.value("bandwidth", config.basis.bandwidth);
    config.basis.prune_distance =
        j.value("prune_distance", config.basis.prune_distance);
}

void parse_prior(const json& j, RunConfig& config) {
    check_keys(j, {"coefficient_scale", "log_sigma_loc", "log_sigma_scale"},
               "prior");
    config.prior.coefficient_scale =
        j.value("coefficient_scale", config.prior.coefficient_scale);
    config.prior.log_sigma_loc =
        j.value("log_sigma_loc", config.prior.log_sigma_loc);
    config.prior.log_sigma_scale =
        j.value("log_sigma_scale", config.prior.log_sigma_scale);
    if (!(config.prior.coefficient_scale > 0.0) ||
        !(config.prior.log_sigma_scale > 0.0))
        throw Error(ErrorKind::Config, "prior scales must be > 0");
}

CovariateQuery query_from_json(const json& j, const std::string& where) {
    if (!j.is_object())
        throw Error(ErrorKind::Schema, where + " must map covariate names to numbers");
    CovariateQuery q;
    for (const auto& item : j.items()) {
        if (!item.value().is_number())
            throw Error(ErrorKind::Schema, where + " values must be numbers");
        q.names.push_back(item.key());
        q.values.push_back(item.value().get<double>());
    }
    return q;
}

void parse_metrics(const json& j, RunConfig& config) {
    check_keys(j, {"metric", "fpr", "mass", "grid", "queries"}, "metrics");
    config.metrics.metric = j.value("metric", config.metrics.metric);
    config.metrics.fpr = j.value("fpr", config.metrics.fpr);
    config.metrics.mass = j.value("mass", config.metrics.mass);
    if (j.contains("grid")) {
        const json& g = j["grid"];
        config.metrics.grid.clear();
        if (g.is_number_unsigned() || g.is_number_integer()) {
            config.metrics.grid.push_back(g.get<std::size_t>());
        } else if (g.is_array()) {
            for (const auto& v : g)
                config.metrics.grid.push_back(v.get<std::size_t>());
        } else {
            throw Error(ErrorKind::Schema,
                        "metrics.grid must be an integer or integer array");
        }
    }
    if (j.contains("queries")) {
        if (!j["queries"].is_array())
            throw Error(ErrorKind::Schema, "metrics.queries must be an array");
        std::size_t i = 0;
        for (const auto& q : j["queries"])
            config.metrics.queries.push_back(query_from_json(
                q, "metrics.queries[" + std::to_string(i++) + "]"));
    }
}

void parse_baseline(const json& j, RunConfig& config) {
    check_keys(j, {"covariate", "edges", "labels", "metric", "fpr", "replicates"},
               "baseline");
    config.baseline.bins.covariate =
        j.value("covariate", config.baseline.bins.covariate);
    if (j.contains("edges"))
        config.baseline.bins.edges = j["edges"].get<std::vector<double>>();
    if (j.contains("labels"))
        config.baseline.bins.labels = string_list(j["labels"], "baseline.labels");
    config.baseline.metric = j.value("metric", config.baseline.metric);
    config.baseline.fpr = j.value("fpr", config.baseline.fpr);
    config.baseline.replicates = j.value("replicates", config.baseline.replicates);
}

}  // namespace

// Function-try so nlohmann missing-key/type errors fold into Schema and
// malformed configs get the usage exit code.
RunConfig run_config_from_json(const nlohmann::json& j) try {
    check_keys(j,
               {"seed", "workers", "orientation", "dataset", "simulate",
                "covariates", "basis", "prior", "fit", "metrics", "baseline",
                "output"},
               "config");
    RunConfig config;
    if (j.contains("seed")) {
        config.seed = j["seed"].get<std::uint64_t>();
        config.seed_set = true;
    }
    config.workers = j.value("workers", config.workers);
    if (j.contains("orientation"))
        config.orientation =
            orientation_from_name(j["orientation"].get<std::string>());
    if (j.contains("dataset")) parse_dataset(j["dataset"], config);
    if (j.contains("simulate")) parse_simulate(j["simulate"], config);
    if (j.contains("covariates")) {
        check_keys(j["covariates"], {"match", "nonmatch"}, "covariates");
        if (j["covariates"].contains("match"))
            config.match_covariates =
                string_list(j["covariates"]["match"], "covariates.match");
        if (j["covariates"].contains("nonmatch"))
            config.nonmatch_covariates =
                string_list(j["covariates"]["nonmatch"], "covariates.nonmatch");
    }
    if (j.contains("basis")) parse_basis(j["basis"], config);
    if (j.contains("prior")) parse_prior(j["prior"], config);
    if (j.contains("fit")) {
        check_keys(j["fit"],
                   {"method", "draws", "components", "seed", "hmc", "svi"}, "fit");
        if (j["fit"].contains("hmc"))
            check_keys(j["fit"]["hmc"],
                       {"step_size", "leapfrog_steps", "warmup", "target_accept"},
                       "fit.hmc");
        if (j["fit"].contains("svi"))
            check_keys(j["fit"]["svi"],
                       {"iterations", "minibatch_size", "learning_rate",
                        "posterior_samples"},
                       "fit.svi");
        config.fit = fit_config_from_json(j["fit"]);
    }
    if (j.contains("metrics")) parse_metrics(j["metrics"], config);
    if (j.contains("baseline")) parse_baseline(j["baseline"], config);
    if (j.contains("output")) {
        check_keys(j["output"], {"dir"}, "output");
        config.output_dir = j["output"].value("dir", config.output_dir);
    }
    return config;
} catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Schema, std::string("config: ") + e.what());
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open config '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::Schema,
                    path + ": invalid JSON (" + std::string(e.what()) + ")");
    }
    return run_config_from_json(j);
}

}  // namespace covaroc
