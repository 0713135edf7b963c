#include "covaroc/datagen.hpp"

#include <algorithm>
#include <cmath>

#include "covaroc/error.hpp"
#include "covaroc/stats.hpp"

namespace covaroc {

double FnSpec::evaluate(const std::vector<double>& x) const {
    switch (kind) {
        case Kind::Constant:
            return value;
        case Kind::Linear: {
            if (slopes.size() != x.size())
                throw Error(ErrorKind::Config,
                            "linear fn has " + std::to_string(slopes.size()) +
                                " slopes for dimension " + std::to_string(x.size()));
            double acc = value;
            for (std::size_t d = 0; d < x.size(); ++d) acc += slopes[d] * x[d];
            return acc;
        }
        case Kind::Sinusoidal:
            if (axis >= x.size())
                throw Error(ErrorKind::Config, "sinusoidal fn axis out of range");
            return value + amplitude * std::sin(frequency * x[axis] + phase);
        case Kind::Bump: {
            if (center.size() != x.size())
                throw Error(ErrorKind::Config, "bump fn center dimension mismatch");
            double d2 = 0.0;
            for (std::size_t d = 0; d < x.size(); ++d) {
                const double diff = x[d] - center[d];
                d2 += diff * diff;
            }
            return value + amplitude * std::exp(-d2 / (2.0 * width * width));
        }
        case Kind::DiagonalRidge: {
            if (x.size() < 2)
                throw Error(ErrorKind::Config, "diagonal-ridge fn needs >= 2 dims");
            const double diff = x[0] - x[1];
            return value + amplitude * std::exp(-diff * diff / (2.0 * width * width));
        }
        case Kind::RidgeBump: {
            if (x.size() < 2)
                throw Error(ErrorKind::Config, "ridge-bump fn needs >= 2 dims");
            if (center.size() != x.size())
                throw Error(ErrorKind::Config, "ridge-bump fn center dimension mismatch");
            double d2 = 0.0;
            for (std::size_t d = 0; d < x.size(); ++d) {
                const double diff = x[d] - center[d];
                d2 += diff * diff;
            }
            const double ridge = x[0] - x[1];
            return value + amplitude * std::exp(-d2 / (2.0 * width * width) -
                                                ridge * ridge /
                                                    (2.0 * ridge_width * ridge_width));
        }
        case Kind::AbsDiff:
            if (x.size() < 2)
                throw Error(ErrorKind::Config, "abs-diff fn needs >= 2 dims");
            return value + amplitude * std::abs(x[0] - x[1]);
    }
    return value;
}

FnSpec FnSpec::constant(double v) {
    FnSpec f;
    f.kind = Kind::Constant;
    f.value = v;
    return f;
}

FnSpec FnSpec::linear(double v, std::vector<double> slopes) {
    FnSpec f;
    f.kind = Kind::Linear;
    f.value = v;
    f.slopes = std::move(slopes);
    return f;
}

FnSpec FnSpec::bump(double v, double amplitude, std::vector<double> center,
                    double width) {
    FnSpec f;
    f.kind = Kind::Bump;
    f.value = v;
    f.amplitude = amplitude;
    f.center = std::move(center);
    f.width = width;
    return f;
}

FnSpec FnSpec::ridge_bump(double v, double amplitude, std::vector<double> center,
                          double width, double ridge_width) {
    FnSpec f;
    f.kind = Kind::RidgeBump;
    f.value = v;
    f.amplitude = amplitude;
    f.center = std::move(center);
    f.width = width;
    f.ridge_width = ridge_width;
    return f;
}

std::string fn_kind_name(FnSpec::Kind kind) {
    switch (kind) {
        case FnSpec::Kind::Constant: return "constant";
        case FnSpec::Kind::Linear: return "linear";
        case FnSpec::Kind::Sinusoidal: return "sinusoidal";
        case FnSpec::Kind::Bump: return "bump";
        case FnSpec::Kind::DiagonalRidge: return "diagonal-ridge";
        case FnSpec::Kind::RidgeBump: return "ridge-bump";
        case FnSpec::Kind::AbsDiff: return "abs-diff";
    }
    return "constant";
}

FnSpec::Kind fn_kind_from_name(const std::string& name) {
    if (name == "constant") return FnSpec::Kind::Constant;
    if (name == "linear") return FnSpec::Kind::Linear;
    if (name == "sinusoidal") return FnSpec::Kind::Sinusoidal;
    if (name == "bump") return FnSpec::Kind::Bump;
    if (name == "diagonal-ridge") return FnSpec::Kind::DiagonalRidge;
    if (name == "ridge-bump") return FnSpec::Kind::RidgeBump;
    if (name == "abs-diff") return FnSpec::Kind::AbsDiff;
    throw Error(ErrorKind::Config, "unknown generator function kind '" + name + "'");
}

void ConditionalTruth::mixture_at(const std::vector<double>& x,
                                  std::vector<double>& weights,
                                  std::vector<double>& locations,
                                  std::vector<double>& scales) const {
    if (components.empty())
        throw Error(ErrorKind::Config, "conditional truth has no components");
    const std::size_t h = components.size();
    weights.resize(h);
    locations.resize(h);
    scales.resize(h);
    double total = 0.0;
    for (std::size_t k = 0; k < h; ++k) {
        weights[k] = components[k].weight.evaluate(x);
        locations[k] = components[k].location.evaluate(x);
        scales[k] = components[k].scale.evaluate(x);
        if (!(weights[k] > 0.0))
            throw Error(ErrorKind::Numeric, "truth weight not positive at a query point");
        if (!(scales[k] > 0.0))
            throw Error(ErrorKind::Numeric, "truth scale not positive at a query point");
        total += weights[k];
    }
    for (double& w : weights) w /= total;
}

namespace {

double raw_mixture_cdf(const std::vector<double>& w, const std::vector<double>& mu,
                       const std::vector<double>& sigma, double y) {
    double acc = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k)
        acc += w[k] * normal_cdf((y - mu[k]) / sigma[k]);
    return acc;
}

}  // namespace

double ConditionalTruth::cdf(double y, const std::vector<double>& x) const {
    std::vector<double> w, mu, sigma;
    mixture_at(x, w, mu, sigma);
    if (!truncate_at_zero) return raw_mixture_cdf(w, mu, sigma, y);
    if (y < 0.0) return 0.0;
    const double at_zero = raw_mixture_cdf(w, mu, sigma, 0.0);
    if (at_zero >= 1.0 - 1e-12)
        throw Error(ErrorKind::Numeric,
                    "truth places essentially all mass below zero at a query point");
    return (raw_mixture_cdf(w, mu, sigma, y) - at_zero) / (1.0 - at_zero);
}

double ConditionalTruth::quantile(double p, const std::vector<double>& x) const {
    if (!(p > 0.0 && p < 1.0))
        throw Error(ErrorKind::Precondition, "truth quantile level outside (0,1)");
    std::vector<double> w, mu, sigma;
    mixture_at(x, w, mu, sigma);
    const double sigma_max = *std::max_element(sigma.begin(), sigma.end());
    const double mu_min = *std::min_element(mu.begin(), mu.end());
    const double mu_max = *std::max_element(mu.begin(), mu.end());
    double lo = truncate_at_zero ? 0.0 : mu_min - 40.0 * sigma_max;
    double hi = mu_max + 40.0 * sigma_max;
    double mid = 0.5 * (lo + hi);
    for (int iter = 0; iter < 100; ++iter) {
        mid = 0.5 * (lo + hi);
        const double c = cdf(mid, x);
        if (std::abs(c - p) <= 1e-10) return mid;
        if (c < p)
            lo = mid;
        else
            hi = mid;
    }
    return mid;
}

double ConditionalTruth::sample(const std::vector<double>& x, Rng& rng) const {
    std::vector<double> w, mu, sigma;
    mixture_at(x, w, mu, sigma);
    for (int attempt = 0; attempt < 100000; ++attempt) {
        const double u = rng.uniform();
        double acc = 0.0;
        std::size_t pick = w.size() - 1;
        for (std::size_t k = 0; k < w.size(); ++k) {
            acc += w[k];
            if (u < acc) {
                pick = k;
                break;
            }
        }
        const double y = mu[pick] + sigma[pick] * rng.normal();
        if (!truncate_at_zero || y >= 0.0) return y;
    }
    throw Error(ErrorKind::Numeric,
                "truncation resampling failed: truth mass is almost entirely negative");
}

void CovariateSampler::validate() const {
    if (lo.size() != hi.size())
        throw Error(ErrorKind::Config, "sampler lo/hi lengths differ");
    for (std::size_t d = 0; d < lo.size(); ++d)
        if (!(hi[d] > lo[d]))
            throw Error(ErrorKind::Config,
                        "sampler box must have lo < hi in every dimension");
    if (kind == Kind::DiagonalBand) {
        if (lo.size() != 2)
            throw Error(ErrorKind::Config, "diagonal-band sampler needs 2 dimensions");
        if (!(halfwidth > 0.0))
            throw Error(ErrorKind::Config, "diagonal-band halfwidth must be > 0");
    }
}

std::vector<double> CovariateSampler::sample(Rng& rng) const {
    std::vector<double> x(dim());
    switch (kind) {
        case Kind::UniformBox:
            for (std::size_t d = 0; d < dim(); ++d)
                x[d] = lo[d] + (hi[d] - lo[d]) * rng.uniform();
            break;
        case Kind::DiagonalBand: {
            x[0] = lo[0] + (hi[0] - lo[0]) * rng.uniform();
            const double delta = rng.normal() * (halfwidth / 3.0);
            x[1] = std::min(hi[1], std::max(lo[1], x[0] + delta));
            break;
        }
        case Kind::DecayBox:
            // Density decreases linearly from lo to hi in each dimension.
            for (std::size_t d = 0; d < dim(); ++d) {
                const double u = rng.uniform();
                x[d] = lo[d] + (hi[d] - lo[d]) * (1.0 - std::sqrt(1.0 - u));
            }
            break;
    }
    return x;
}

std::string sampler_kind_name(CovariateSampler::Kind kind) {
    switch (kind) {
        case CovariateSampler::Kind::UniformBox: return "uniform-box";
        case CovariateSampler::Kind::DiagonalBand: return "diagonal-band";
        case CovariateSampler::Kind::DecayBox: return "decay-box";
    }
    return "uniform-box";
}

CovariateSampler::Kind sampler_kind_from_name(const std::string& name) {
    if (name == "uniform-box") return CovariateSampler::Kind::UniformBox;
    if (name == "diagonal-band") return CovariateSampler::Kind::DiagonalBand;
    if (name == "decay-box") return CovariateSampler::Kind::DecayBox;
    throw Error(ErrorKind::Config, "unknown sampler kind '" + name + "'");
}

void TruthSpec::validate() const {
    sampler.validate();
    if (covariate_names.size() != sampler.dim())
        throw Error(ErrorKind::Config,
                    "covariate name count does not match sampler dimension");
    if (n_match + n_nonmatch < 1)
        throw Error(ErrorKind::Config, "truth spec generates zero records");
    if (match_truth.components.empty() || nonmatch_truth.components.empty())
        throw Error(ErrorKind::Config, "both truth generators need components");
}

PairDataset generate(const TruthSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    PairDataset ds;
    ds.covariate_names = spec.covariate_names;
    ds.records.reserve(spec.n_match + spec.n_nonmatch);
    for (std::size_t i = 0; i < spec.n_match; ++i) {
        PairRecord rec;
        rec.query_id = "m" + std::to_string(i) + "a";
        rec.gallery_id = "m" + std::to_string(i) + "b";
        rec.covariates = spec.sampler.sample(rng);
        rec.score = spec.match_truth.sample(rec.covariates, rng);
        rec.match = true;
        rec.diagonal = false;
        ds.records.push_back(std::move(rec));
    }
    for (std::size_t i = 0; i < spec.n_nonmatch; ++i) {
        PairRecord rec;
        rec.query_id = "n" + std::to_string(i) + "a";
        rec.gallery_id = "n" + std::to_string(i) + "b";
        rec.covariates = spec.sampler.sample(rng);
        rec.score = spec.nonmatch_truth.sample(rec.covariates, rng);
        rec.match = false;
        rec.diagonal = false;
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

std::vector<OraclePoint> oracle_grid(const TruthSpec& spec,
                                     const std::vector<std::vector<double>>& grid,
                                     BaselineMetric metric, double fpr,
                                     std::size_t n_per_point,
                                     std::uint64_t seed) {
    if (grid.empty())
        throw Error(ErrorKind::Precondition, "oracle_grid: empty grid");
    if (n_per_point < 2)
        throw Error(ErrorKind::Precondition, "oracle_grid: n_per_point must be >= 2");
    std::vector<OraclePoint> out(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
        Rng rng(derive_seed(seed, g));
        std::vector<double> match(n_per_point), nonmatch(n_per_point);
        for (std::size_t i = 0; i < n_per_point; ++i)
            match[i] = spec.match_truth.sample(grid[g], rng);
        for (std::size_t i = 0; i < n_per_point; ++i)
            nonmatch[i] = spec.nonmatch_truth.sample(grid[g], rng);
        out[g].x = grid[g];
        out[g].value = metric == BaselineMetric::TprAtFpr
                           ? empirical_tpr(match, nonmatch, fpr)
                           : empirical_auc(match, nonmatch);
    }
    return out;
}

std::vector<std::vector<double>> sampler_grid(const CovariateSampler& sampler,
                                              std::size_t points_per_dim) {
    sampler.validate();
    if (points_per_dim < 1)
        throw Error(ErrorKind::Config, "grid needs >= 1 point per dimension");
    const std::size_t dims = sampler.dim();
    if (dims == 0)
        return {std::vector<double>{}};
    std::vector<std::vector<double>> axes(dims);
    for (std::size_t d = 0; d < dims; ++d) {
        if (points_per_dim == 1) {
            axes[d].push_back(0.5 * (sampler.lo[d] + sampler.hi[d]));
        } else {
            const double step = (sampler.hi[d] - sampler.lo[d]) /
                                static_cast<double>(points_per_dim - 1);
            for (std::size_t i = 0; i < points_per_dim; ++i)
                axes[d].push_back(sampler.lo[d] + step * static_cast<double>(i));
        }
    }
    std::size_t total = 1;
    for (const auto& axis : axes) total *= axis.size();
    std::vector<std::vector<double>> grid;
    grid.reserve(total);
    std::vector<std::size_t> index(dims, 0);
    for (std::size_t row = 0; row < total; ++row) {
        std::vector<double> point(dims);
        for (std::size_t d = 0; d < dims; ++d) point[d] = axes[d][index[d]];
        grid.push_back(std::move(point));
        for (std::size_t d = dims; d-- > 0;) {
            if (++index[d] < axes[d].size()) break;
            index[d] = 0;
        }
    }
    return grid;
}

std::vector<PairRecord> preferred_view_stream(const TruthSpec& spec,
                                              const FnSpec& effect,
                                              double noise_std, std::size_t n,
                                              std::uint64_t seed) {
    spec.sampler.validate();
    if (noise_std < 0.0)
        throw Error(ErrorKind::Config, "noise_std must be >= 0");
    Rng rng(seed);
    std::vector<PairRecord> records;
    records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::vector<double> xq = spec.sampler.sample(rng);
        const std::vector<double> xg = spec.sampler.sample(rng);
        std::vector<double> both = xq;
        both.insert(both.end(), xg.begin(), xg.end());
        PairRecord rec;
        rec.query_id = rec.gallery_id = "pv" + std::to_string(i);
        rec.covariates = both;
        rec.score = effect.evaluate(both) +
                    (noise_std > 0.0 ? noise_std * rng.normal() : 0.0);
        rec.match = true;
        rec.diagonal = true;
        records.push_back(std::move(rec));
    }
    return records;
}

double truth_tpr(const ConditionalTruth& match, const ConditionalTruth& nonmatch,
                 const std::vector<double>& x, double fpr) {
    return match.cdf(nonmatch.quantile(fpr, x), x);
}

TruthSpec preset_truth(const std::string& name) {
    TruthSpec spec;
    if (name == "scale-ridge") {
        // Fig. 4 analogue: separation peaks in a diagonal band around
        // (0.5, 0.5) in query/gallery scale and collapses away from it.
        spec.covariate_names = {"q_scale", "g_scale"};
        spec.sampler.kind = CovariateSampler::Kind::UniformBox;
        spec.sampler.lo = {0.1, 0.1};
        spec.sampler.hi = {1.1, 1.1};
        TruthComponent main;
        main.weight = FnSpec::constant(0.85);
        main.location = FnSpec::ridge_bump(4.0, -2.8, {0.5, 0.5}, 0.22, 0.3);
        main.scale = FnSpec::constant(0.45);
        TruthComponent tail;
        tail.weight = FnSpec::constant(0.15);
        tail.location = FnSpec::ridge_bump(4.8, -2.8, {0.5, 0.5}, 0.22, 0.3);
        tail.scale = FnSpec::constant(0.7);
        spec.match_truth.components = {main, tail};
        TruthComponent nm;
        nm.weight = FnSpec::constant(1.0);
        nm.location = FnSpec::linear(4.12, {0.15, 0.15});
        nm.scale = FnSpec::constant(0.5);
        spec.nonmatch_truth.components = {nm};
        spec.n_match = 25000;
        spec.n_nonmatch = 25000;
    } else if (name == "binormal") {
        // Unit-variance normals two sigma apart; the common +5 shift keeps
        // scores positive and leaves the ROC unchanged.
        spec.covariate_names = {};
        spec.sampler.kind = CovariateSampler::Kind::UniformBox;
        TruthComponent m;
        m.weight = FnSpec::constant(1.0);
        m.location = FnSpec::constant(5.0);
        m.scale = FnSpec::constant(1.0);
        spec.match_truth.components = {m};
        TruthComponent nm;
        nm.weight = FnSpec::constant(1.0);
        nm.location = FnSpec::constant(7.0);
        nm.scale = FnSpec::constant(1.0);
        spec.nonmatch_truth.components = {nm};
        spec.n_match = 20000;
        spec.n_nonmatch = 20000;
    } else if (name == "calibration-1d") {
        spec.covariate_names = {"x"};
        spec.sampler.kind = CovariateSampler::Kind::UniformBox;
        spec.sampler.lo = {0.0};
        spec.sampler.hi = {1.0};
        TruthComponent m;
        m.weight = FnSpec::constant(1.0);
        m.location = FnSpec::linear(2.0, {1.2});
        m.scale = FnSpec::constant(0.5);
        spec.match_truth.components = {m};
        TruthComponent nm;
        nm.weight = FnSpec::constant(1.0);
        nm.location = FnSpec::constant(4.5);
        nm.scale = FnSpec::constant(0.55);
        spec.nonmatch_truth.components = {nm};
        spec.n_match = 6000;
        spec.n_nonmatch = 6000;
    } else if (name == "age-trend") {
        // Monotone decreasing performance in age with thinning data density.
        spec.covariate_names = {"age"};
        spec.sampler.kind = CovariateSampler::Kind::DecayBox;
        spec.sampler.lo = {16.0};
        spec.sampler.hi = {70.0};
        TruthComponent m;
        m.weight = FnSpec::constant(1.0);
        m.location = FnSpec::linear(1.2 - 1.8 * 16.0 / 54.0, {1.8 / 54.0});
        m.scale = FnSpec::constant(0.4);
        spec.match_truth.components = {m};
        TruthComponent nm;
        nm.weight = FnSpec::constant(1.0);
        nm.location = FnSpec::constant(4.0);
        nm.scale = FnSpec::constant(0.5);
        spec.nonmatch_truth.components = {nm};
        spec.n_match = 30000;
        spec.n_nonmatch = 30000;
    } else {
        throw Error(ErrorKind::Config, "unknown preset '" + name + "'");
    }
    return spec;
}

std::vector<std::string> preset_names() {
    return {"scale-ridge", "binormal", "calibration-1d", "age-trend"};
}

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::vector<std::string>& allowed,
                const std::string& where) {
    for (const auto& item : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
            throw Error(ErrorKind::Schema,
                        "unknown key '" + item.key() + "' in " + where);
    }
}

json fn_to_json(const FnSpec& f) {
    json j;
    j["kind"] = fn_kind_name(f.kind);
    j["value"] = f.value;
    switch (f.kind) {
        case FnSpec::Kind::Constant:
            break;
        case FnSpec::Kind::Linear:
            j["slopes"] = f.slopes;
            break;
        case FnSpec::Kind::Sinusoidal:
            j["amplitude"] = f.amplitude;
            j["frequency"] = f.frequency;
            j["phase"] = f.phase;
            j["axis"] = f.axis;
            break;
        case FnSpec::Kind::Bump:
            j["amplitude"] = f.amplitude;
            j["center"] = f.center;
            j["width"] = f.width;
            break;
        case FnSpec::Kind::DiagonalRidge:
            j["amplitude"] = f.amplitude;
            j["width"] = f.width;
            break;
        case FnSpec::Kind::RidgeBump:
            j["amplitude"] = f.amplitude;
            j["center"] = f.center;
            j["width"] = f.width;
            j["ridge_width"] = f.ridge_width;
            break;
        case FnSpec::Kind::AbsDiff:
            j["amplitude"] = f.amplitude;
            break;
    }
    return j;
}

FnSpec fn_from_json(const json& j, const std::string& where) {
    if (!j.is_object())
        throw Error(ErrorKind::Schema, where + " must be an object");
    check_keys(j,
               {"kind", "value", "slopes", "amplitude", "frequency", "phase",
                "axis", "center", "width", "ridge_width"},
               where);
    FnSpec f;
    f.kind = fn_kind_from_name(j.value("kind", "constant"));
    f.value = j.value("value", 0.0);
    if (j.contains("slopes")) f.slopes = j["slopes"].get<std::vector<double>>();
    f.amplitude = j.value("amplitude", 0.0);
    f.frequency = j.value("frequency", 1.0);
    f.phase = j.value("phase", 0.0);
    f.axis = j.value("axis", std::size_t{0});
    if (j.contains("center")) f.center = j["center"].get<std::vector<double>>();
    f.width = j.value("width", 1.0);
    f.ridge_width = j.value("ridge_width", 1.0);
    return f;
}

json truth_side_to_json(const ConditionalTruth& truth) {
    json comps = json::array();
    for (const auto& c : truth.components) {
        json jc;
        jc["weight"] = fn_to_json(c.weight);
        jc["location"] = fn_to_json(c.location);
        jc["scale"] = fn_to_json(c.scale);
        comps.push_back(jc);
    }
    json j;
    j["components"] = comps;
    j["truncate_at_zero"] = truth.truncate_at_zero;
    return j;
}

ConditionalTruth truth_side_from_json(const json& j, const std::string& where) {
    if (!j.is_object())
        throw Error(ErrorKind::Schema, where + " must be an object");
    check_keys(j, {"components", "truncate_at_zero"}, where);
    if (!j.contains("components") || !j["components"].is_array())
        throw Error(ErrorKind::Schema, where + " needs a components array");
    ConditionalTruth truth;
    truth.truncate_at_zero = j.value("truncate_at_zero", true);
    std::size_t i = 0;
    for (const auto& jc : j["components"]) {
        const std::string comp_where =
            where + ".components[" + std::to_string(i++) + "]";
        check_keys(jc, {"weight", "location", "scale"}, comp_where);
        TruthComponent c;
        c.weight = fn_from_json(jc.at("weight"), comp_where + ".weight");
        c.location = fn_from_json(jc.at("location"), comp_where + ".location");
        c.scale = fn_from_json(jc.at("scale"), comp_where + ".scale");
        truth.components.push_back(std::move(c));
    }
    return truth;
}

}  // namespace

nlohmann::json truth_to_json(const TruthSpec& spec) {
    json j;
    j["match"] = truth_side_to_json(spec.match_truth);
    j["nonmatch"] = truth_side_to_json(spec.nonmatch_truth);
    json sampler;
    sampler["kind"] = sampler_kind_name(spec.sampler.kind);
    sampler["lo"] = spec.sampler.lo;
    sampler["hi"] = spec.sampler.hi;
    if (spec.sampler.kind == CovariateSampler::Kind::DiagonalBand)
        sampler["halfwidth"] = spec.sampler.halfwidth;
    j["sampler"] = sampler;
    j["n_match"] = spec.n_match;
    j["n_nonmatch"] = spec.n_nonmatch;
    j["covariates"] = spec.covariate_names;
    return j;
}

// Function-try so nlohmann missing-key/type errors fold into Schema and
// malformed truth documents get the usage exit code.
TruthSpec truth_from_json(const nlohmann::json& j) try {
    if (!j.is_object())
        throw Error(ErrorKind::Schema, "truth spec must be an object");
    check_keys(j, {"match", "nonmatch", "sampler", "n_match", "n_nonmatch",
                   "covariates"},
               "truth spec");
    TruthSpec spec;
    spec.match_truth = truth_side_from_json(j.at("match"), "match");
    spec.nonmatch_truth = truth_side_from_json(j.at("nonmatch"), "nonmatch");
    const json& sampler = j.at("sampler");
    check_keys(sampler, {"kind", "lo", "hi", "halfwidth"}, "sampler");
    spec.sampler.kind = sampler_kind_from_name(sampler.value("kind", "uniform-box"));
    if (sampler.contains("lo"))
        spec.sampler.lo = sampler["lo"].get<std::vector<double>>();
    if (sampler.contains("hi"))
        spec.sampler.hi = sampler["hi"].get<std::vector<double>>();
    spec.sampler.halfwidth = sampler.value("halfwidth", 0.1);
    spec.n_match = j.value("n_match", std::size_t{0});
    spec.n_nonmatch = j.value("n_nonmatch", std::size_t{0});
    if (j.contains("covariates"))
        spec.covariate_names = j["covariates"].get<std::vector<std::string>>();
    spec.validate();
    return spec;
} catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Schema, std::string("truth spec: ") + e.what());
}

}  // namespace covaroc
