#include "covaroc/model_io.hpp"

#include <fstream>

#include "covaroc/error.hpp"

namespace covaroc {

namespace {

using nlohmann::json;

void require(bool ok, const std::string& message) {
    if (!ok) throw Error(ErrorKind::Schema, message);
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index cols_hint,
                                 const std::string& where) {
    require(j.is_array(), where + " must be an array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    Eigen::Index cols = cols_hint;
    if (rows > 0) {
        require(j[0].is_array(), where + " rows must be arrays");
        cols = static_cast<Eigen::Index>(j[0].size());
    }
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = j[static_cast<std::size_t>(r)];
        require(row.is_array() && static_cast<Eigen::Index>(row.size()) == cols,
                where + " rows must all have equal length");
        for (Eigen::Index c = 0; c < cols; ++c) {
            const auto& cell = row[static_cast<std::size_t>(c)];
            require(cell.is_number(), where + " entries must be numbers");
            m(r, c) = cell.get<double>();
        }
    }
    return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

Eigen::VectorXd vector_from_json(const json& j, const std::string& where) {
    require(j.is_array(), where + " must be an array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        require(j[i].is_number(), where + " entries must be numbers");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

json affine_to_json(const Affine& a) {
    return json{{"mean", a.mean}, {"std", a.std}};
}

Affine affine_from_json(const json& j, const std::string& where) {
    require(j.is_object() && j.contains("mean") && j.contains("std"),
            where + " must hold mean and std");
    Affine a;
    a.mean = j.at("mean").get<double>();
    a.std = j.at("std").get<double>();
    require(a.std > 0.0, where + " std must be > 0");
    return a;
}

json stream_to_json(const Posterior& posterior) {
    json basis;
    basis["centers"] = matrix_to_json(posterior.basis.centers);
    json active = json::array();
    for (bool a : posterior.basis.active) active.push_back(a);
    basis["active"] = active;
    basis["bandwidth"] = posterior.basis.bandwidth;

    json prior;
    prior["coefficient_scale"] = posterior.prior.coefficient_scale;
    prior["log_sigma_loc"] = posterior.prior.log_sigma_loc;
    prior["log_sigma_scale"] = posterior.prior.log_sigma_scale;

    json norm;
    norm["score"] = affine_to_json(posterior.normalization.score);
    json covs = json::array();
    for (std::size_t d = 0; d < posterior.normalization.covariate_names.size();
         ++d) {
        json c = affine_to_json(posterior.normalization.covariates[d]);
        c["name"] = posterior.normalization.covariate_names[d];
        if (d < posterior.normalization.native_range.size()) {
            c["native_lo"] = posterior.normalization.native_range[d].lo;
            c["native_hi"] = posterior.normalization.native_range[d].hi;
        }
        covs.push_back(std::move(c));
    }
    norm["covariates"] = covs;

    const auto& diag = posterior.diagnostics;
    json jdiag;
    jdiag["method"] = diag.method;
    jdiag["acceptance_rate"] = diag.acceptance_rate;
    jdiag["divergences"] = diag.divergences;
    jdiag["final_elbo"] = diag.final_elbo;
    jdiag["divergence_warning"] = diag.divergence_warning;
    jdiag["convergence_warning"] = diag.convergence_warning;
    jdiag["warnings"] = diag.warnings;

    json draws = json::array();
    for (const auto& p : posterior.draws) {
        json d;
        d["W_weights"] = matrix_to_json(p.W_weights);
        d["W_locations"] = matrix_to_json(p.W_locations);
        d["log_sigmas"] = vector_to_json(p.log_sigmas);
        draws.push_back(std::move(d));
    }

    json j;
    j["basis"] = basis;
    j["prior"] = prior;
    j["normalization"] = norm;
    j["diagnostics"] = jdiag;
    j["draws"] = draws;
    return j;
}

Posterior stream_from_json(const json& j, const std::string& where) {
    require(j.is_object(), where + " must be an object");
    for (const char* key : {"basis", "prior", "normalization", "draws"})
        require(j.contains(key), where + " is missing '" + key + "'");

    Posterior posterior;
    const json& basis = j.at("basis");
    posterior.basis.centers =
        matrix_from_json(basis.at("centers"), 0, where + ".basis.centers");
    require(basis.contains("active") && basis.at("active").is_array(),
            where + ".basis needs an active array");
    for (const auto& a : basis.at("active"))
        posterior.basis.active.push_back(a.get<bool>());
    require(posterior.basis.active.size() ==
                static_cast<std::size_t>(posterior.basis.centers.rows()),
            where + ".basis active mask length mismatch");
    posterior.basis.bandwidth = basis.at("bandwidth").get<double>();
    require(posterior.basis.bandwidth > 0.0, where + ".basis bandwidth must be > 0");

    const json& prior = j.at("prior");
    posterior.prior.coefficient_scale = prior.at("coefficient_scale").get<double>();
    posterior.prior.log_sigma_loc = prior.at("log_sigma_loc").get<double>();
    posterior.prior.log_sigma_scale = prior.at("log_sigma_scale").get<double>();

    const json& norm = j.at("normalization");
    posterior.normalization.score =
        affine_from_json(norm.at("score"), where + ".normalization.score");
    require(norm.contains("covariates") && norm.at("covariates").is_array(),
            where + ".normalization needs a covariates array");
    for (const auto& c : norm.at("covariates")) {
        posterior.normalization.covariate_names.push_back(
            c.at("name").get<std::string>());
        posterior.normalization.covariates.push_back(
            affine_from_json(c, where + ".normalization.covariates"));
        Range native{0.0, 0.0};
        if (c.contains("native_lo")) native.lo = c.at("native_lo").get<double>();
        if (c.contains("native_hi")) native.hi = c.at("native_hi").get<double>();
        posterior.normalization.native_range.push_back(native);
    }

    if (j.contains("diagnostics")) {
        const json& diag = j.at("diagnostics");
        posterior.diagnostics.method = diag.value("method", std::string{});
        posterior.diagnostics.acceptance_rate = diag.value("acceptance_rate", 0.0);
        posterior.diagnostics.divergences =
            diag.value("divergences", std::size_t{0});
        posterior.diagnostics.final_elbo = diag.value("final_elbo", 0.0);
        posterior.diagnostics.divergence_warning =
            diag.value("divergence_warning", false);
        posterior.diagnostics.convergence_warning =
            diag.value("convergence_warning", false);
        if (diag.contains("warnings"))
            posterior.diagnostics.warnings =
                diag.at("warnings").get<std::vector<std::string>>();
    }

    const json& draws = j.at("draws");
    require(draws.is_array() && !draws.empty(),
            where + ".draws must be a nonempty array");
    const auto features =
        static_cast<Eigen::Index>(posterior.basis.num_features());
    for (const auto& d : draws) {
        MixtureParams p;
        p.W_weights = matrix_from_json(d.at("W_weights"), features,
                                       where + ".draws W_weights");
        p.W_locations = matrix_from_json(d.at("W_locations"), features,
                                         where + ".draws W_locations");
        p.log_sigmas = vector_from_json(d.at("log_sigmas"), where + ".draws log_sigmas");
        p.validate();
        require(p.features() == features,
                where + ".draws parameter width does not match the basis");
        if (!posterior.draws.empty())
            require(p.components() == posterior.draws.front().components(),
                    where + ".draws have inconsistent component counts");
        posterior.draws.push_back(std::move(p));
    }
    return posterior;
}

}  // namespace

json fit_config_to_json(const FitConfig& config) {
    json j;
    j["method"] = fit_method_name(config.method);
    j["draws"] = config.draws;
    j["components"] = config.components;
    j["seed"] = config.seed;
    j["hmc"] = json{{"step_size", config.hmc.step_size},
                    {"leapfrog_steps", config.hmc.leapfrog_steps},
                    {"warmup", config.hmc.warmup},
                    {"target_accept", config.hmc.target_accept}};
    j["svi"] = json{{"iterations", config.svi.iterations},
                    {"minibatch_size", config.svi.minibatch_size},
                    {"learning_rate", config.svi.learning_rate},
                    {"posterior_samples", config.svi.posterior_samples}};
    return j;
}

FitConfig fit_config_from_json(const json& j) {
    require(j.is_object(), "fit config must be an object");
    FitConfig config;
    if (j.contains("method"))
        config.method = fit_method_from_name(j.at("method").get<std::string>());
    config.draws = j.value("draws", config.draws);
    config.components = j.value("components", config.components);
    config.seed = j.value("seed", config.seed);
    if (j.contains("hmc")) {
        const json& h = j.at("hmc");
        config.hmc.step_size = h.value("step_size", config.hmc.step_size);
        config.hmc.leapfrog_steps = h.value("leapfrog_steps", config.hmc.leapfrog_steps);
        config.hmc.warmup = h.value("warmup", config.hmc.warmup);
        config.hmc.target_accept = h.value("target_accept", config.hmc.target_accept);
    }
    if (j.contains("svi")) {
        const json& s = j.at("svi");
        config.svi.iterations = s.value("iterations", config.svi.iterations);
        config.svi.minibatch_size =
            s.value("minibatch_size", config.svi.minibatch_size);
        config.svi.learning_rate = s.value("learning_rate", config.svi.learning_rate);
        config.svi.posterior_samples =
            s.value("posterior_samples", config.svi.posterior_samples);
    }
    config.validate();
    return config;
}

json model_to_json(const Model& model) {
    json j;
    j["format"] = kModelFormat;
    j["seed"] = model.seed;
    j["orientation"] = orientation_name(model.orientation);
    j["fit"] = fit_config_to_json(model.config);
    j["match"] = stream_to_json(model.match);
    j["nonmatch"] = stream_to_json(model.nonmatch);
    return j;
}

// Function-try so nlohmann type errors fold into Schema and malformed model
// documents get the usage exit code.
Model model_from_json(const json& j) try {
    require(j.is_object(), "model document must be a JSON object");
    require(j.contains("format"), "model document is missing 'format'");
    const auto format = j.at("format").get<std::string>();
    require(format == kModelFormat,
            "unsupported model format '" + format + "' (expected " +
                std::string(kModelFormat) + ")");
    Model model;
    model.seed = j.value("seed", std::uint64_t{0});
    model.orientation =
        orientation_from_name(j.value("orientation", std::string("distance")));
    if (j.contains("fit")) model.config = fit_config_from_json(j.at("fit"));
    require(j.contains("match") && j.contains("nonmatch"),
            "model document needs match and nonmatch streams");
    model.match = stream_from_json(j.at("match"), "match");
    model.nonmatch = stream_from_json(j.at("nonmatch"), "nonmatch");
    return model;
} catch (const json::exception& e) {
    throw Error(ErrorKind::Schema, std::string("model document: ") + e.what());
}

void save_model(const Model& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
    out << model_to_json(model).dump(2) << "\n";
    if (!out)
        throw Error(ErrorKind::Io, "failed writing '" + path + "'");
}

Model load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Schema,
                    path + ": invalid JSON (" + std::string(e.what()) + ")");
    }
    return model_from_json(j);
}

}  // namespace covaroc
