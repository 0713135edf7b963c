// covaroc: fit covariate-conditional verification score models and query
// ROC-style metrics with credible intervals. Subcommands cover the whole
// pipeline: simulate/ingest -> fit -> metrics/threshold/roc -> baseline and
// oracle comparison. Every command is deterministic given config + seed and
// artifact files never embed wall-clock values.

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "covaroc/baseline.hpp"
#include "covaroc/config.hpp"
#include "covaroc/csv.hpp"
#include "covaroc/datagen.hpp"
#include "covaroc/dataset.hpp"
#include "covaroc/error.hpp"
#include "covaroc/inference.hpp"
#include "covaroc/metrics.hpp"
#include "covaroc/model_io.hpp"
#include "covaroc/stats.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace covaroc;

namespace {

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

std::string format_seconds(double s) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f s", s);
    return buf;
}

// ---------------------------------------------------------------------------
// Flag plumbing shared by every subcommand. Flags override config keys.

struct CommonFlags {
    std::string config_path;
    std::uint64_t seed = 0;
    std::size_t workers = 0;
    std::string orientation;
    std::string out_dir;

    CLI::Option* seed_opt = nullptr;
    CLI::Option* workers_opt = nullptr;
    CLI::Option* orientation_opt = nullptr;
    CLI::Option* out_opt = nullptr;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "JSON run configuration file");
    f.seed_opt = cmd->add_option("--seed", f.seed,
                                 "Random seed (also COVAROC_SEED env var)");
    f.workers_opt =
        cmd->add_option("--workers", f.workers, "Worker threads (0 = all cores)");
    f.orientation_opt = cmd->add_option(
        "--orientation", f.orientation, "Score orientation: distance|similarity");
    f.out_opt = cmd->add_option("--out", f.out_dir, "Output directory");
}

std::uint64_t parse_seed_text(const std::string& text, const std::string& what) {
    if (text.empty()) throw Error(ErrorKind::Usage, what + ": empty seed");
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(text.c_str(), &end, 10);
    if (errno != 0 || end == text.c_str() || *end != '\0')
        throw Error(ErrorKind::Usage, what + ": invalid seed '" + text + "'");
    return static_cast<std::uint64_t>(v);
}

RunConfig load_base_config(const CommonFlags& f) {
    RunConfig config =
        f.config_path.empty() ? RunConfig{} : load_run_config(f.config_path);
    if (f.seed_opt->count()) {
        config.seed = f.seed;
        config.seed_set = true;
    }
    if (f.workers_opt->count()) config.workers = f.workers;
    if (f.orientation_opt->count())
        config.orientation = orientation_from_name(f.orientation);
    if (f.out_opt->count()) config.output_dir = f.out_dir;
    if (!config.seed_set) {
        if (const char* env = std::getenv("COVAROC_SEED")) {
            config.seed = parse_seed_text(env, "COVAROC_SEED");
            config.seed_set = true;
        }
    }
    return config;
}

struct SchemaFlags {
    std::string data_path;
    std::string score_column;
    std::string match_column;
    std::string query_id_column;
    std::string gallery_id_column;
    std::vector<std::string> covariate_columns;

    CLI::Option* score_opt = nullptr;
    CLI::Option* match_opt = nullptr;
    CLI::Option* query_opt = nullptr;
    CLI::Option* gallery_opt = nullptr;
    CLI::Option* covs_opt = nullptr;
};

void add_schema_flags(CLI::App* cmd, SchemaFlags& f) {
    cmd->add_option("--data", f.data_path, "Pairwise comparison CSV");
    f.score_opt = cmd->add_option("--score-col", f.score_column, "Score column");
    f.match_opt =
        cmd->add_option("--match-col", f.match_column, "Match flag column");
    f.query_opt =
        cmd->add_option("--query-col", f.query_id_column, "Query id column");
    f.gallery_opt =
        cmd->add_option("--gallery-col", f.gallery_id_column, "Gallery id column");
    f.covs_opt = cmd->add_option("--covariate-cols", f.covariate_columns,
                                 "Covariate columns (default: all remaining)")
                     ->delimiter(',');
}

void apply_schema_flags(const SchemaFlags& f, RunConfig& config) {
    if (!f.data_path.empty()) config.dataset_source = f.data_path;
    if (f.score_opt->count()) config.schema.score_column = f.score_column;
    if (f.match_opt->count()) config.schema.match_column = f.match_column;
    if (f.query_opt->count()) config.schema.query_id_column = f.query_id_column;
    if (f.gallery_opt->count())
        config.schema.gallery_id_column = f.gallery_id_column;
    if (f.covs_opt->count())
        config.schema.covariate_columns = f.covariate_columns;
}

PairDataset load_dataset(const RunConfig& config) {
    if (config.dataset_source.empty())
        throw Error(ErrorKind::Usage,
                    "no dataset: pass --data or set dataset.source in the config");
    return ingest_pairs_csv(config.dataset_source, config.schema);
}

void ensure_output_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw Error(ErrorKind::Io,
                    "cannot create output directory '" + dir + "': " + ec.message());
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

void write_json_file(const json& j, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) throw Error(ErrorKind::Io, "failed writing '" + path + "'");
}

void check_unit_interval(double v, const std::string& what) {
    if (!(v > 0.0) || !(v < 1.0))
        throw Error(ErrorKind::Usage,
                    what + " must lie strictly inside (0,1), got " +
                        format_double(v));
}

// "250x250" or "10" -> per-dimension gridpoint counts.
std::vector<std::size_t> parse_grid_spec(const std::string& text) {
    std::vector<std::size_t> counts;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t next = text.find('x', pos);
        const std::string part =
            text.substr(pos, next == std::string::npos ? next : next - pos);
        char* end = nullptr;
        errno = 0;
        const unsigned long long v = std::strtoull(part.c_str(), &end, 10);
        if (part.empty() || errno != 0 || *end != '\0' || v == 0)
            throw Error(ErrorKind::Usage,
                        "--grid expects counts like '10' or '250x250', got '" +
                            text + "'");
        counts.push_back(static_cast<std::size_t>(v));
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    return counts;
}

// "name=value,name=value" -> one query point in native units.
CovariateQuery parse_query_spec(const std::string& text) {
    CovariateQuery q;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t next = text.find(',', pos);
        if (next == std::string::npos) next = text.size();
        const std::string part = text.substr(pos, next - pos);
        const std::size_t eq = part.find('=');
        if (eq == std::string::npos || eq == 0)
            throw Error(ErrorKind::Usage,
                        "--at expects name=value pairs, got '" + part + "'");
        char* end = nullptr;
        errno = 0;
        const std::string value_text = part.substr(eq + 1);
        const double v = std::strtod(value_text.c_str(), &end);
        if (value_text.empty() || errno != 0 || *end != '\0')
            throw Error(ErrorKind::Usage,
                        "--at value for '" + part.substr(0, eq) +
                            "' is not a number: '" + value_text + "'");
        q.names.push_back(part.substr(0, eq));
        q.values.push_back(v);
        pos = next + 1;
    }
    return q;
}

// Union of the two streams' covariates, match-stream names first; ranges
// widen to cover both streams where a name appears in both.
void model_covariate_span(const Model& model, std::vector<std::string>& names,
                          std::vector<Range>& ranges) {
    names.clear();
    ranges.clear();
    const auto add_stream = [&](const Posterior& p) {
        const auto& norm = p.normalization;
        for (std::size_t i = 0; i < norm.covariate_names.size(); ++i) {
            const auto& name = norm.covariate_names[i];
            const auto it = std::find(names.begin(), names.end(), name);
            if (it == names.end()) {
                names.push_back(name);
                ranges.push_back(norm.native_range[i]);
            } else {
                Range& r = ranges[static_cast<std::size_t>(it - names.begin())];
                r.lo = std::min(r.lo, norm.native_range[i].lo);
                r.hi = std::max(r.hi, norm.native_range[i].hi);
            }
        }
    };
    add_stream(model.match);
    add_stream(model.nonmatch);
}

std::vector<CovariateQuery> grid_queries(const Model& model,
                                         const std::vector<std::size_t>& counts) {
    std::vector<std::string> names;
    std::vector<Range> ranges;
    model_covariate_span(model, names, ranges);
    if (names.empty()) return {CovariateQuery{}};
    std::vector<std::size_t> per_dim(names.size());
    if (counts.size() == 1) {
        std::fill(per_dim.begin(), per_dim.end(), counts.front());
    } else if (counts.size() == names.size()) {
        per_dim = counts;
    } else {
        throw Error(ErrorKind::Usage,
                    "grid has " + std::to_string(counts.size()) +
                        " counts but the model uses " +
                        std::to_string(names.size()) + " covariates");
    }

    std::size_t total = 1;
    for (std::size_t c : per_dim) total *= c;
    std::vector<CovariateQuery> queries;
    queries.reserve(total);
    std::vector<std::size_t> idx(names.size(), 0);
    for (std::size_t point = 0; point < total; ++point) {
        CovariateQuery q;
        q.names = names;
        q.values.resize(names.size());
        for (std::size_t d = 0; d < names.size(); ++d) {
            const std::size_t c = per_dim[d];
            q.values[d] = c == 1 ? 0.5 * (ranges[d].lo + ranges[d].hi)
                                 : ranges[d].lo + (ranges[d].hi - ranges[d].lo) *
                                                      static_cast<double>(idx[d]) /
                                                      static_cast<double>(c - 1);
        }
        queries.push_back(std::move(q));
        for (std::size_t d = names.size(); d-- > 0;) {
            if (++idx[d] < per_dim[d]) break;
            idx[d] = 0;
        }
    }
    return queries;
}

BaselineMetric baseline_metric_from_name(const std::string& name) {
    if (name == "tpr") return BaselineMetric::TprAtFpr;
    if (name == "auc") return BaselineMetric::Auc;
    throw Error(ErrorKind::Usage,
                "metric must be 'tpr' or 'auc', got '" + name + "'");
}

json query_json(const CovariateQuery& q) {
    json out = json::object();
    for (std::size_t i = 0; i < q.names.size(); ++i) out[q.names[i]] = q.values[i];
    return out;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateFlags {
    CommonFlags common;
    std::string preset;
    std::size_t n = 0;
    std::size_t n_match = 0;
    std::size_t n_nonmatch = 0;
    bool oracle_enabled = true;
    std::size_t oracle_grid = 0;
    std::string oracle_metric;
    double oracle_fpr = 0.0;
    std::size_t oracle_samples = 0;

    CLI::Option* n_opt = nullptr;
    CLI::Option* n_match_opt = nullptr;
    CLI::Option* n_nonmatch_opt = nullptr;
    CLI::Option* oracle_opt = nullptr;
    CLI::Option* oracle_grid_opt = nullptr;
    CLI::Option* oracle_metric_opt = nullptr;
    CLI::Option* oracle_fpr_opt = nullptr;
    CLI::Option* oracle_samples_opt = nullptr;
};

void run_simulate(const SimulateFlags& f) {
    RunConfig config = load_base_config(f.common);
    if (!f.preset.empty()) config.simulate.preset = f.preset;
    if (f.n_opt->count()) {
        if (f.n == 0) throw Error(ErrorKind::Usage, "--n must be >= 1");
        config.simulate.n_match = f.n;
        config.simulate.n_nonmatch = f.n;
    }
    if (f.n_match_opt->count()) config.simulate.n_match = f.n_match;
    if (f.n_nonmatch_opt->count()) config.simulate.n_nonmatch = f.n_nonmatch;
    if (f.oracle_opt->count())
        config.simulate.oracle.enabled = f.oracle_enabled;
    if (f.oracle_grid_opt->count()) config.simulate.oracle.grid = f.oracle_grid;
    if (f.oracle_metric_opt->count())
        config.simulate.oracle.metric = f.oracle_metric;
    if (f.oracle_fpr_opt->count()) config.simulate.oracle.fpr = f.oracle_fpr;
    if (f.oracle_samples_opt->count())
        config.simulate.oracle.n_per_point = f.oracle_samples;

    TruthSpec spec;
    if (config.simulate.truth) {
        spec = *config.simulate.truth;
    } else if (!config.simulate.preset.empty()) {
        spec = preset_truth(config.simulate.preset);
    } else {
        throw Error(ErrorKind::Usage,
                    "simulate needs --preset or a simulate.truth config entry");
    }
    if (config.simulate.n_match) spec.n_match = *config.simulate.n_match;
    if (config.simulate.n_nonmatch) spec.n_nonmatch = *config.simulate.n_nonmatch;
    if (spec.n_match == 0 || spec.n_nonmatch == 0)
        throw Error(ErrorKind::Usage, "record counts must be >= 1");
    spec.validate();

    ensure_output_dir(config.output_dir);
    const Stopwatch timer;
    const PairDataset ds = generate(spec, config.seed);
    const std::string pairs_path = join_path(config.output_dir, "pairs.csv");
    write_pairs_csv(ds, pairs_path);

    json truth_doc;
    truth_doc["seed"] = config.seed;
    truth_doc["truth"] = truth_to_json(spec);
    const std::string truth_path = join_path(config.output_dir, "truth.json");
    write_json_file(truth_doc, truth_path);
    std::cout << "simulate: " << ds.size() << " records -> " << pairs_path
              << "\n";
    std::cout << "simulate: truth -> " << truth_path << "\n";

    if (config.simulate.oracle.enabled) {
        const OracleConfig& oc = config.simulate.oracle;
        const BaselineMetric metric = baseline_metric_from_name(oc.metric);
        if (metric == BaselineMetric::TprAtFpr)
            check_unit_interval(oc.fpr, "oracle fpr");
        if (oc.grid == 0)
            throw Error(ErrorKind::Usage, "oracle grid must be >= 1");
        const auto grid = sampler_grid(spec.sampler, oc.grid);
        const auto points = oracle_grid(spec, grid, metric, oc.fpr,
                                        oc.n_per_point, derive_seed(config.seed, 3));
        std::vector<std::string> header = spec.covariate_names;
        header.push_back("value");
        CsvWriter writer(header);
        for (const auto& p : points) {
            std::vector<std::string> cells;
            cells.reserve(p.x.size() + 1);
            for (double v : p.x) cells.push_back(format_double(v));
            cells.push_back(format_double(p.value));
            writer.add_row(cells);
        }
        const std::string oracle_path = join_path(config.output_dir, "oracle.csv");
        writer.write(oracle_path);
        std::cout << "simulate: oracle (" << points.size() << " gridpoints, "
                  << oc.metric << ") -> " << oracle_path << "\n";
    }
    std::cout << "simulate: done in " << format_seconds(timer.seconds()) << "\n";
}

// ---------------------------------------------------------------------------
// fit

struct FitFlags {
    CommonFlags common;
    SchemaFlags schema;
    std::string model_path;
    std::vector<std::string> match_covariates;
    std::vector<std::string> nonmatch_covariates;
    std::string method;
    int draws = 0;
    int components = 0;
    std::string basis_grid;
    double bandwidth = 0.0;
    double prune_distance = 0.0;
    double coefficient_scale = 0.0;
    double log_sigma_loc = 0.0;
    double log_sigma_scale = 0.0;
    int iterations = 0;
    int minibatch = 0;
    double learning_rate = 0.0;
    int posterior_samples = 0;
    double step_size = 0.0;
    int leapfrog = 0;
    int warmup = 0;
    double target_accept = 0.0;

    CLI::Option* match_covs_opt = nullptr;
    CLI::Option* nonmatch_covs_opt = nullptr;
    CLI::Option* method_opt = nullptr;
    CLI::Option* draws_opt = nullptr;
    CLI::Option* components_opt = nullptr;
    CLI::Option* basis_grid_opt = nullptr;
    CLI::Option* bandwidth_opt = nullptr;
    CLI::Option* prune_opt = nullptr;
    CLI::Option* coef_scale_opt = nullptr;
    CLI::Option* ls_loc_opt = nullptr;
    CLI::Option* ls_scale_opt = nullptr;
    CLI::Option* iterations_opt = nullptr;
    CLI::Option* minibatch_opt = nullptr;
    CLI::Option* lr_opt = nullptr;
    CLI::Option* post_samples_opt = nullptr;
    CLI::Option* step_opt = nullptr;
    CLI::Option* leapfrog_opt = nullptr;
    CLI::Option* warmup_opt = nullptr;
    CLI::Option* accept_opt = nullptr;
};

std::string report_path_for(const std::string& model_path) {
    const std::string suffix = ".json";
    if (model_path.size() > suffix.size() &&
        model_path.compare(model_path.size() - suffix.size(), suffix.size(),
                           suffix) == 0)
        return model_path.substr(0, model_path.size() - suffix.size()) +
               ".report.json";
    return model_path + ".report.json";
}

void print_stream_diagnostics(const std::string& stream,
                              const FitDiagnostics& d) {
    std::cout << "fit: " << stream << " [" << d.method << "]";
    if (d.method == "hmc") {
        std::cout << " acceptance " << format_double(d.acceptance_rate)
                  << ", divergences " << d.divergences;
    } else {
        std::cout << " final ELBO " << format_double(d.final_elbo);
    }
    std::cout << "\n";
    for (const auto& w : d.warnings)
        std::cout << "fit: " << stream << " warning: " << w << "\n";
}

void run_fit(const FitFlags& f) {
    RunConfig config = load_base_config(f.common);
    apply_schema_flags(f.schema, config);
    if (f.match_covs_opt->count()) config.match_covariates = f.match_covariates;
    if (f.nonmatch_covs_opt->count())
        config.nonmatch_covariates = f.nonmatch_covariates;
    if (f.method_opt->count()) config.fit.method = fit_method_from_name(f.method);
    if (f.draws_opt->count()) config.fit.draws = f.draws;
    if (f.components_opt->count()) config.fit.components = f.components;
    if (f.basis_grid_opt->count())
        config.basis.grid = parse_grid_spec(f.basis_grid);
    if (f.bandwidth_opt->count()) config.basis.bandwidth = f.bandwidth;
    if (f.prune_opt->count()) config.basis.prune_distance = f.prune_distance;
    if (f.coef_scale_opt->count())
        config.prior.coefficient_scale = f.coefficient_scale;
    if (f.ls_loc_opt->count()) config.prior.log_sigma_loc = f.log_sigma_loc;
    if (f.ls_scale_opt->count()) config.prior.log_sigma_scale = f.log_sigma_scale;
    if (f.iterations_opt->count()) config.fit.svi.iterations = f.iterations;
    if (f.minibatch_opt->count()) config.fit.svi.minibatch_size = f.minibatch;
    if (f.lr_opt->count()) config.fit.svi.learning_rate = f.learning_rate;
    if (f.post_samples_opt->count())
        config.fit.svi.posterior_samples = f.posterior_samples;
    if (f.step_opt->count()) config.fit.hmc.step_size = f.step_size;
    if (f.leapfrog_opt->count()) config.fit.hmc.leapfrog_steps = f.leapfrog;
    if (f.warmup_opt->count()) config.fit.hmc.warmup = f.warmup;
    if (f.accept_opt->count()) config.fit.hmc.target_accept = f.target_accept;
    config.fit.seed = config.seed;
    config.fit.validate();

    PairDataset ds = load_dataset(config);
    ds = normalize(std::move(ds));
    std::cout << "fit: " << ds.size() << " records, "
              << ds.covariate_names.size() << " covariates from "
              << config.dataset_source << "\n";

    ensure_output_dir(config.output_dir);
    const Stopwatch timer;
    const FitBothResult both =
        fit_both(ds, config.match_covariates, config.nonmatch_covariates,
                 config.basis, config.prior, config.fit);

    Model model;
    model.match = both.match.posterior;
    model.nonmatch = both.nonmatch.posterior;
    model.orientation = config.orientation;
    model.seed = config.seed;
    model.config = config.fit;

    const std::string model_path =
        f.model_path.empty() ? join_path(config.output_dir, "model.json")
                             : f.model_path;
    save_model(model, model_path);

    // Wall time is printed, never written: artifacts stay byte-identical
    // across reruns.
    json report;
    report["format"] = "covaroc-report/1";
    report["seed"] = config.seed;
    report["fit"] = fit_config_to_json(config.fit);
    report["match"] = {{"trace", both.match.report.trace}};
    report["nonmatch"] = {{"trace", both.nonmatch.report.trace}};
    const std::string report_path = report_path_for(model_path);
    write_json_file(report, report_path);

    print_stream_diagnostics("match", model.match.diagnostics);
    print_stream_diagnostics("nonmatch", model.nonmatch.diagnostics);
    std::cout << "fit: model -> " << model_path << "\n";
    std::cout << "fit: report -> " << report_path << "\n";
    std::cout << "fit: done in " << format_seconds(timer.seconds()) << "\n";
}

// ---------------------------------------------------------------------------
// metrics / threshold

struct QueryFlags {
    std::string model_path;
    std::vector<std::string> at;
    std::string grid;

    CLI::Option* grid_opt = nullptr;
};

void add_query_flags(CLI::App* cmd, QueryFlags& f) {
    cmd->add_option("--model", f.model_path, "Fitted model JSON")->required();
    cmd->add_option("--at", f.at,
                    "Query point 'name=value,name=value' (repeatable)");
    f.grid_opt = cmd->add_option(
        "--grid", f.grid, "Gridpoints per covariate, e.g. '10' or '250x250'");
}

std::vector<CovariateQuery> resolve_queries(const Model& model,
                                            const QueryFlags& f,
                                            const RunConfig& config) {
    if (!f.at.empty()) {
        std::vector<CovariateQuery> queries;
        queries.reserve(f.at.size());
        for (const auto& spec : f.at) queries.push_back(parse_query_spec(spec));
        return queries;
    }
    if (f.grid_opt->count()) return grid_queries(model, parse_grid_spec(f.grid));
    if (!config.metrics.queries.empty()) return config.metrics.queries;
    if (!config.metrics.grid.empty())
        return grid_queries(model, config.metrics.grid);
    if (model.match.normalization.covariate_names.empty() &&
        model.nonmatch.normalization.covariate_names.empty())
        return {CovariateQuery{}};
    throw Error(ErrorKind::Usage, "provide query points via --at or --grid");
}

// Column order for tables: the union of model covariates; every query must
// supply a value for each (enforced by the metric evaluation itself).
std::vector<std::string> table_names(const Model& model,
                                     const std::vector<CovariateQuery>& queries) {
    std::vector<std::string> names;
    std::vector<Range> ranges;
    model_covariate_span(model, names, ranges);
    if (!names.empty()) return names;
    // Constant-basis models: echo whatever the queries carry (may be empty).
    return queries.empty() ? names : queries.front().names;
}

void write_metric_tables(const std::string& csv_path,
                         const std::string& json_path,
                         const std::vector<std::string>& names,
                         const std::vector<CovariateQuery>& queries,
                         const std::vector<MetricResult>& results,
                         const std::string& value_column, json meta) {
    std::vector<std::string> header = names;
    header.push_back(value_column);
    header.push_back("lo");
    header.push_back("hi");
    CsvWriter writer(header);
    json points = json::array();
    for (std::size_t i = 0; i < queries.size(); ++i) {
        std::vector<std::string> cells;
        cells.reserve(header.size());
        for (const auto& name : names)
            cells.push_back(format_double(queries[i].value_of(name)));
        cells.push_back(format_double(results[i].point));
        cells.push_back(format_double(results[i].interval.lo));
        cells.push_back(format_double(results[i].interval.hi));
        writer.add_row(cells);
        json p;
        p["x"] = query_json(queries[i]);
        p[value_column] = results[i].point;
        p["lo"] = results[i].interval.lo;
        p["hi"] = results[i].interval.hi;
        points.push_back(std::move(p));
    }
    writer.write(csv_path);
    meta["points"] = std::move(points);
    write_json_file(meta, json_path);
}

struct MetricsFlags {
    CommonFlags common;
    QueryFlags query;
    std::string metric;
    double fpr = 0.0;
    double mass = 0.0;

    CLI::Option* metric_opt = nullptr;
    CLI::Option* fpr_opt = nullptr;
    CLI::Option* mass_opt = nullptr;
};

void run_metric_command(const MetricsFlags& f, bool threshold_only) {
    RunConfig config = load_base_config(f.common);
    if (f.metric_opt && f.metric_opt->count()) config.metrics.metric = f.metric;
    if (f.fpr_opt->count()) config.metrics.fpr = f.fpr;
    if (f.mass_opt->count()) config.metrics.mass = f.mass;

    const Model model = load_model(f.query.model_path);
    const Orientation orientation = f.common.orientation_opt->count()
                                        ? config.orientation
                                        : model.orientation;

    SurfaceRequest request;
    request.metric = threshold_only ? MetricKind::Threshold
                                    : metric_kind_from_name(config.metrics.metric);
    request.fpr = config.metrics.fpr;
    request.mass = config.metrics.mass;
    request.orientation = orientation;
    request.workers = config.workers;
    if (request.metric != MetricKind::Auc)
        check_unit_interval(request.fpr, "fpr");
    check_unit_interval(request.mass, "mass");

    const std::vector<CovariateQuery> queries =
        resolve_queries(model, f.query, config);
    const std::vector<std::string> names = table_names(model, queries);

    ensure_output_dir(config.output_dir);
    const Stopwatch timer;
    const std::vector<MetricResult> results =
        metric_surface(model.match, model.nonmatch, queries, request);

    const std::string value_column = metric_kind_name(request.metric);
    const std::string stem = threshold_only ? "thresholds" : "metrics";
    const std::string csv_path = join_path(config.output_dir, stem + ".csv");
    const std::string json_path = join_path(config.output_dir, stem + ".json");
    json meta;
    meta["metric"] = value_column;
    meta["mass"] = request.mass;
    meta["orientation"] = orientation_name(orientation);
    if (request.metric != MetricKind::Auc) meta["fpr"] = request.fpr;
    write_metric_tables(csv_path, json_path, names, queries, results,
                        value_column, std::move(meta));
    std::cout << stem << ": " << queries.size() << " points -> " << csv_path
              << " in " << format_seconds(timer.seconds()) << "\n";
}

// ---------------------------------------------------------------------------
// roc

struct RocFlags {
    CommonFlags common;
    QueryFlags query;
};

void run_roc(const RocFlags& f) {
    RunConfig config = load_base_config(f.common);

    const Model model = load_model(f.query.model_path);
    const Orientation orientation = f.common.orientation_opt->count()
                                        ? config.orientation
                                        : model.orientation;

    std::vector<CovariateQuery> queries = resolve_queries(model, f.query, config);
    if (queries.size() != 1)
        throw Error(ErrorKind::Usage, "roc takes exactly one --at query point");

    ensure_output_dir(config.output_dir);
    const Stopwatch timer;
    const std::vector<double> grid = auc_fpr_grid();
    const RocCurve curve =
        roc_at(model.match, model.nonmatch, queries.front(), grid, orientation);

    // One row per (draw, gridpoint) so plotting keeps the full envelope.
    CsvWriter writer({"draw", "fpr", "tpr"});
    for (Eigen::Index d = 0; d < curve.tpr.rows(); ++d)
        for (std::size_t g = 0; g < curve.fpr.size(); ++g)
            writer.add_row({std::to_string(d), format_double(curve.fpr[g]),
                            format_double(
                                curve.tpr(d, static_cast<Eigen::Index>(g)))});
    const std::string csv_path = join_path(config.output_dir, "roc.csv");
    writer.write(csv_path);
    std::cout << "roc: " << curve.tpr.rows() << " draws x " << curve.fpr.size()
              << " gridpoints -> " << csv_path << " in "
              << format_seconds(timer.seconds()) << "\n";
}

// ---------------------------------------------------------------------------
// baseline

struct BaselineFlags {
    CommonFlags common;
    SchemaFlags schema;
    std::string covariate;
    std::vector<double> edges;
    std::vector<std::string> labels;
    std::string metric;
    double fpr = 0.0;
    std::size_t replicates = 0;
    bool age_preset = false;

    CLI::Option* metric_opt = nullptr;
    CLI::Option* fpr_opt = nullptr;
    CLI::Option* replicates_opt = nullptr;
};

void run_baseline(const BaselineFlags& f) {
    RunConfig config = load_base_config(f.common);
    apply_schema_flags(f.schema, config);
    if (f.age_preset) {
        // The classic three-bin design over an age covariate.
        config.baseline.bins.covariate = "age";
        config.baseline.bins.edges = {16.0, 30.0, 50.0, 70.0};
        config.baseline.bins.labels = {"young", "middle", "old"};
    }
    if (!f.covariate.empty()) config.baseline.bins.covariate = f.covariate;
    if (!f.edges.empty()) config.baseline.bins.edges = f.edges;
    if (!f.labels.empty()) config.baseline.bins.labels = f.labels;
    if (f.metric_opt->count()) config.baseline.metric = f.metric;
    if (f.fpr_opt->count()) config.baseline.fpr = f.fpr;
    if (f.replicates_opt->count()) config.baseline.replicates = f.replicates;

    const BaselineMetric metric = baseline_metric_from_name(config.baseline.metric);
    if (metric == BaselineMetric::TprAtFpr)
        check_unit_interval(config.baseline.fpr, "fpr");
    config.baseline.bins.validate();

    const PairDataset ds = load_dataset(config);
    ensure_output_dir(config.output_dir);
    const Stopwatch timer;
    const std::vector<BootstrapResult> results = binned_metric(
        ds, config.baseline.bins, metric, config.baseline.fpr,
        config.baseline.replicates, config.seed, config.orientation);

    const std::string value_column = config.baseline.metric;
    CsvWriter writer(
        {"bin", value_column, "lo", "hi", "match_count", "nonmatch_count"});
    json bins = json::array();
    for (const auto& r : results) {
        json b;
        b["bin"] = r.bin_label;
        b["valid"] = r.valid;
        b["match_count"] = r.match_count;
        b["nonmatch_count"] = r.nonmatch_count;
        if (r.valid) {
            writer.add_row({r.bin_label, format_double(r.point),
                            format_double(r.ci.lo), format_double(r.ci.hi),
                            std::to_string(r.match_count),
                            std::to_string(r.nonmatch_count)});
            b[value_column] = r.point;
            b["lo"] = r.ci.lo;
            b["hi"] = r.ci.hi;
            b["replicates"] = r.replicates;
            std::cout << "baseline: " << r.bin_label << " " << value_column
                      << " " << format_double(r.point) << " ["
                      << format_double(r.ci.lo) << ", " << format_double(r.ci.hi)
                      << "] (" << r.match_count << " match / "
                      << r.nonmatch_count << " non-match)\n";
        } else {
            b["note"] = r.note;
            std::cout << "baseline: " << r.bin_label << " skipped: " << r.note
                      << "\n";
        }
        bins.push_back(std::move(b));
    }
    const std::string csv_path = join_path(config.output_dir, "baseline.csv");
    writer.write(csv_path);
    json doc;
    doc["metric"] = value_column;
    if (metric == BaselineMetric::TprAtFpr) doc["fpr"] = config.baseline.fpr;
    doc["replicates"] = config.baseline.replicates;
    doc["seed"] = config.seed;
    doc["bins"] = std::move(bins);
    const std::string json_path = join_path(config.output_dir, "baseline.json");
    write_json_file(doc, json_path);
    std::cout << "baseline: " << results.size() << " bins -> " << csv_path
              << " in " << format_seconds(timer.seconds()) << "\n";
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateFlags {
    CommonFlags common;
    std::string model_path;
    std::string oracle_path;
    std::string metric = "tpr";
    double fpr = 0.0;
    double mass = 0.0;

    CLI::Option* fpr_opt = nullptr;
    CLI::Option* mass_opt = nullptr;
};

void run_evaluate(const EvaluateFlags& f) {
    RunConfig config = load_base_config(f.common);
    if (f.fpr_opt->count()) config.metrics.fpr = f.fpr;
    if (f.mass_opt->count()) config.metrics.mass = f.mass;

    const Model model = load_model(f.model_path);
    const Orientation orientation = f.common.orientation_opt->count()
                                        ? config.orientation
                                        : model.orientation;

    SurfaceRequest request;
    if (f.metric == "tpr") {
        request.metric = MetricKind::TprAtFpr;
    } else if (f.metric == "auc") {
        request.metric = MetricKind::Auc;
    } else {
        throw Error(ErrorKind::Usage,
                    "evaluate metric must be 'tpr' or 'auc', got '" + f.metric +
                        "'");
    }
    request.fpr = config.metrics.fpr;
    request.mass = config.metrics.mass;
    request.orientation = orientation;
    request.workers = config.workers;
    if (request.metric == MetricKind::TprAtFpr)
        check_unit_interval(request.fpr, "fpr");
    check_unit_interval(request.mass, "mass");

    const CsvTable table = read_csv(f.oracle_path);
    const std::size_t value_col = table.require_column("value");
    std::vector<std::string> names;
    std::vector<std::size_t> name_cols;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        if (c == value_col) continue;
        names.push_back(table.header[c]);
        name_cols.push_back(c);
    }
    std::vector<CovariateQuery> queries;
    std::vector<double> oracle_values;
    queries.reserve(table.rows.size());
    oracle_values.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        CovariateQuery q;
        q.names = names;
        for (std::size_t c : name_cols)
            q.values.push_back(parse_cell_double(table.rows[r][c],
                                                 table.header[c],
                                                 table.line_numbers[r]));
        queries.push_back(std::move(q));
        oracle_values.push_back(parse_cell_double(
            table.rows[r][value_col], "value", table.line_numbers[r]));
    }

    ensure_output_dir(config.output_dir);
    const Stopwatch timer;
    const std::vector<MetricResult> results =
        metric_surface(model.match, model.nonmatch, queries, request);
    const MetricResult rsq = r_squared(results, oracle_values);

    const std::string value_column = metric_kind_name(request.metric);
    std::vector<std::string> header = names;
    header.push_back("oracle");
    header.push_back(value_column);
    header.push_back("lo");
    header.push_back("hi");
    CsvWriter writer(header);
    json points = json::array();
    for (std::size_t i = 0; i < queries.size(); ++i) {
        std::vector<std::string> cells;
        for (double v : queries[i].values) cells.push_back(format_double(v));
        cells.push_back(format_double(oracle_values[i]));
        cells.push_back(format_double(results[i].point));
        cells.push_back(format_double(results[i].interval.lo));
        cells.push_back(format_double(results[i].interval.hi));
        writer.add_row(cells);
        json p;
        p["x"] = query_json(queries[i]);
        p["oracle"] = oracle_values[i];
        p[value_column] = results[i].point;
        p["lo"] = results[i].interval.lo;
        p["hi"] = results[i].interval.hi;
        points.push_back(std::move(p));
    }
    const std::string csv_path = join_path(config.output_dir, "evaluate.csv");
    writer.write(csv_path);

    json doc;
    doc["metric"] = value_column;
    if (request.metric == MetricKind::TprAtFpr) doc["fpr"] = request.fpr;
    doc["r_squared"] = {{"point", rsq.point},
                        {"lo", rsq.interval.lo},
                        {"hi", rsq.interval.hi},
                        {"mass", rsq.mass}};
    doc["points"] = std::move(points);
    const std::string json_path = join_path(config.output_dir, "evaluate.json");
    write_json_file(doc, json_path);

    std::cout << "evaluate: R^2 = " << format_double(rsq.point) << " ["
              << format_double(rsq.interval.lo) << ", "
              << format_double(rsq.interval.hi) << "] over " << queries.size()
              << " points in " << format_seconds(timer.seconds()) << "\n";
    std::cout << "evaluate: tables -> " << csv_path << ", " << json_path << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "covaroc: covariate-conditional verification metrics with credible "
        "intervals"};
    app.require_subcommand(1);

    SimulateFlags sim;
    {
        CLI::App* cmd = app.add_subcommand(
            "simulate", "Draw a synthetic pair dataset from a known truth");
        add_common_flags(cmd, sim.common);
        cmd->add_option("--preset", sim.preset,
                        "Named truth: " + [] {
                            std::string names;
                            for (const auto& n : preset_names())
                                names += (names.empty() ? "" : ", ") + n;
                            return names;
                        }());
        sim.n_opt = cmd->add_option("--n", sim.n,
                                    "Records per stream (sets both counts)");
        sim.n_match_opt = cmd->add_option("--n-match", sim.n_match,
                                          "Match record count");
        sim.n_nonmatch_opt = cmd->add_option("--n-nonmatch", sim.n_nonmatch,
                                             "Non-match record count");
        sim.oracle_opt = cmd->add_flag("--oracle,!--no-oracle",
                                       sim.oracle_enabled,
                                       "Also write the brute-force oracle grid");
        sim.oracle_grid_opt = cmd->add_option(
            "--oracle-grid", sim.oracle_grid, "Oracle gridpoints per dimension");
        sim.oracle_metric_opt = cmd->add_option(
            "--oracle-metric", sim.oracle_metric, "Oracle metric: tpr|auc");
        sim.oracle_fpr_opt =
            cmd->add_option("--oracle-fpr", sim.oracle_fpr, "Oracle FPR target");
        sim.oracle_samples_opt =
            cmd->add_option("--oracle-samples", sim.oracle_samples,
                            "Oracle draws per stream per gridpoint");
        cmd->callback([&sim] { run_simulate(sim); });
    }

    FitFlags fit;
    {
        CLI::App* cmd = app.add_subcommand(
            "fit", "Fit both score streams and write a model file");
        add_common_flags(cmd, fit.common);
        add_schema_flags(cmd, fit.schema);
        cmd->add_option("--model", fit.model_path,
                        "Model output path (default <out>/model.json)");
        fit.match_covs_opt =
            cmd->add_option("--match-covariates", fit.match_covariates,
                            "Covariates for the match stream (default all)")
                ->delimiter(',');
        fit.nonmatch_covs_opt =
            cmd->add_option("--nonmatch-covariates", fit.nonmatch_covariates,
                            "Covariates for the non-match stream (default all)")
                ->delimiter(',');
        fit.method_opt =
            cmd->add_option("--method", fit.method, "Inference method: svi|hmc");
        fit.draws_opt =
            cmd->add_option("--draws", fit.draws, "Posterior draws to keep");
        fit.components_opt = cmd->add_option("--components", fit.components,
                                             "Mixture components per stream");
        fit.basis_grid_opt = cmd->add_option(
            "--basis-grid", fit.basis_grid,
            "Basis centers per covariate, e.g. '10' or '10x12'");
        fit.bandwidth_opt = cmd->add_option("--bandwidth", fit.bandwidth,
                                            "Basis bandwidth (0 = auto)");
        fit.prune_opt = cmd->add_option("--prune-distance", fit.prune_distance,
                                        "Center pruning distance");
        fit.coef_scale_opt = cmd->add_option(
            "--coefficient-scale", fit.coefficient_scale, "Prior coefficient scale");
        fit.ls_loc_opt = cmd->add_option("--log-sigma-loc", fit.log_sigma_loc,
                                         "Prior log-sigma location");
        fit.ls_scale_opt = cmd->add_option(
            "--log-sigma-scale", fit.log_sigma_scale, "Prior log-sigma scale");
        fit.iterations_opt =
            cmd->add_option("--iterations", fit.iterations, "SVI iterations");
        fit.minibatch_opt =
            cmd->add_option("--minibatch", fit.minibatch, "SVI minibatch size");
        fit.lr_opt = cmd->add_option("--learning-rate", fit.learning_rate,
                                     "SVI Adam base learning rate");
        fit.post_samples_opt =
            cmd->add_option("--posterior-samples", fit.posterior_samples,
                            "SVI posterior draws (default --draws)");
        fit.step_opt =
            cmd->add_option("--step-size", fit.step_size, "HMC initial step size");
        fit.leapfrog_opt =
            cmd->add_option("--leapfrog", fit.leapfrog, "HMC leapfrog steps");
        fit.warmup_opt =
            cmd->add_option("--warmup", fit.warmup, "HMC warmup transitions");
        fit.accept_opt = cmd->add_option("--target-accept", fit.target_accept,
                                         "HMC dual-averaging target");
        cmd->callback([&fit] { run_fit(fit); });
    }

    MetricsFlags metrics;
    {
        CLI::App* cmd = app.add_subcommand(
            "metrics", "Query a fitted model for tpr/auc/threshold tables");
        add_common_flags(cmd, metrics.common);
        add_query_flags(cmd, metrics.query);
        metrics.metric_opt = cmd->add_option(
            "--metric", metrics.metric, "Metric: tpr|auc|threshold");
        metrics.fpr_opt =
            cmd->add_option("--fpr", metrics.fpr, "False positive rate target");
        metrics.mass_opt =
            cmd->add_option("--mass", metrics.mass, "Credible interval mass");
        cmd->callback([&metrics] { run_metric_command(metrics, false); });
    }

    MetricsFlags threshold;
    {
        CLI::App* cmd = app.add_subcommand(
            "threshold", "Decision thresholds achieving a target FPR");
        add_common_flags(cmd, threshold.common);
        add_query_flags(cmd, threshold.query);
        threshold.metric_opt = nullptr;
        threshold.fpr_opt =
            cmd->add_option("--fpr", threshold.fpr, "False positive rate target");
        threshold.mass_opt =
            cmd->add_option("--mass", threshold.mass, "Credible interval mass");
        cmd->callback([&threshold] { run_metric_command(threshold, true); });
    }

    RocFlags roc;
    {
        CLI::App* cmd = app.add_subcommand(
            "roc", "Per-draw ROC curves at one query point");
        add_common_flags(cmd, roc.common);
        add_query_flags(cmd, roc.query);
        cmd->callback([&roc] { run_roc(roc); });
    }

    BaselineFlags baseline;
    {
        CLI::App* cmd = app.add_subcommand(
            "baseline", "Discrete-bin empirical metrics with bootstrap CIs");
        add_common_flags(cmd, baseline.common);
        add_schema_flags(cmd, baseline.schema);
        cmd->add_option("--covariate", baseline.covariate,
                        "Item covariate to bin (bare name; q_/g_ resolved)");
        cmd->add_option("--edges", baseline.edges,
                        "Bin edges, strictly increasing")
            ->delimiter(',');
        cmd->add_option("--labels", baseline.labels, "Bin labels")
            ->delimiter(',');
        cmd->add_flag("--age-preset", baseline.age_preset,
                      "Three-bin age design: young/middle/old over 16-70");
        baseline.metric_opt =
            cmd->add_option("--metric", baseline.metric, "Metric: tpr|auc");
        baseline.fpr_opt =
            cmd->add_option("--fpr", baseline.fpr, "False positive rate target");
        baseline.replicates_opt = cmd->add_option(
            "--replicates", baseline.replicates, "Bootstrap replicates");
        cmd->callback([&baseline] { run_baseline(baseline); });
    }

    EvaluateFlags evaluate;
    {
        CLI::App* cmd = app.add_subcommand(
            "evaluate", "Score a fitted model against an oracle table");
        add_common_flags(cmd, evaluate.common);
        cmd->add_option("--model", evaluate.model_path, "Fitted model JSON")
            ->required();
        cmd->add_option("--oracle", evaluate.oracle_path,
                        "Oracle CSV (covariate columns + value)")
            ->required();
        cmd->add_option("--metric", evaluate.metric, "Metric: tpr|auc");
        evaluate.fpr_opt = cmd->add_option("--fpr", evaluate.fpr,
                                           "False positive rate target");
        evaluate.mass_opt = cmd->add_option("--mass", evaluate.mass,
                                            "Credible interval mass");
        cmd->callback([&evaluate] { run_evaluate(evaluate); });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.is_usage() ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
