#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "covaroc/baseline.hpp"
#include "covaroc/basis.hpp"
#include "covaroc/datagen.hpp"
#include "covaroc/dataset.hpp"
#include "covaroc/inference.hpp"
#include "covaroc/metrics.hpp"

namespace covaroc {

struct OracleConfig {
    bool enabled = true;
    std::size_t grid = 10;  // points per covariate dimension
    std::string metric = "tpr";
    double fpr = 1e-3;
    std::size_t n_per_point = 100000;
};

struct SimulateConfig {
    std::string preset;
    std::optional<TruthSpec> truth;  // explicit truth beats preset
    std::optional<std::size_t> n_match;
    std::optional<std::size_t> n_nonmatch;
    OracleConfig oracle;
};

struct MetricsConfig {
    std::string metric = "tpr";
    double fpr = 1e-3;
    double mass = 0.95;
    // Gridpoints per covariate dimension; empty -> use explicit queries,
    // a single element broadcasts over every dimension.
    std::vector<std::size_t> grid;
    std::vector<CovariateQuery> queries;
};

struct BaselineRunConfig {
    BinSpec bins;
    std::string metric = "tpr";
    double fpr = 1e-3;
    std::size_t replicates = 100;
};

// One declarative document drives every subcommand; CLI flags override keys.
struct RunConfig {
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t workers = 0;
    Orientation orientation = Orientation::Distance;

    std::string dataset_source;
    CsvSchema schema;

    SimulateConfig simulate;

    std::vector<std::string> match_covariates;     // empty -> all
    std::vector<std::string> nonmatch_covariates;  // empty -> all
    BasisConfig basis;
    PriorSpec prior;
    FitConfig fit;

    MetricsConfig metrics;
    BaselineRunConfig baseline;

    std::string output_dir = ".";
};

// Strict parse: unknown keys anywhere are a schema error.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

}  // namespace covaroc
