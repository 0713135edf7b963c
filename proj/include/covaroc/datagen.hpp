#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "covaroc/baseline.hpp"
#include "covaroc/dataset.hpp"
#include "covaroc/rng.hpp"

namespace covaroc {

// Scalar function of a covariate vector; the building block for conditional
// truth weights, locations, and scales. DiagonalRidge, RidgeBump, and AbsDiff
// read the first two coordinates.
struct FnSpec {
    enum class Kind {
        Constant,
        Linear,
        Sinusoidal,
        Bump,
        DiagonalRidge,
        RidgeBump,
        AbsDiff,
    };
    Kind kind = Kind::Constant;
    double value = 0.0;  // additive offset for every kind
    std::vector<double> slopes;
    double amplitude = 0.0;
    double frequency = 1.0;
    double phase = 0.0;
    std::size_t axis = 0;
    std::vector<double> center;
    double width = 1.0;
    double ridge_width = 1.0;

    double evaluate(const std::vector<double>& x) const;

    static FnSpec constant(double v);
    static FnSpec linear(double v, std::vector<double> slopes);
    static FnSpec bump(double v, double amplitude, std::vector<double> center,
                       double width);
    static FnSpec ridge_bump(double v, double amplitude,
                             std::vector<double> center, double width,
                             double ridge_width);
};

std::string fn_kind_name(FnSpec::Kind kind);
FnSpec::Kind fn_kind_from_name(const std::string& name);

struct TruthComponent {
    FnSpec weight;    // must evaluate > 0 everywhere
    FnSpec location;  // raw score units
    FnSpec scale;     // must evaluate > 0 everywhere
};

// Closed-form conditional mixture of normals, truncated below zero so that
// generated distances are nonnegative.
struct ConditionalTruth {
    std::vector<TruthComponent> components;
    bool truncate_at_zero = true;

    void mixture_at(const std::vector<double>& x, std::vector<double>& weights,
                    std::vector<double>& locations,
                    std::vector<double>& scales) const;
    double cdf(double y, const std::vector<double>& x) const;
    double quantile(double p, const std::vector<double>& x) const;
    double sample(const std::vector<double>& x, Rng& rng) const;
};

struct CovariateSampler {
    enum class Kind { UniformBox, DiagonalBand, DecayBox };
    Kind kind = Kind::UniformBox;
    std::vector<double> lo;
    std::vector<double> hi;
    double halfwidth = 0.1;  // DiagonalBand: ~99.7% of pairs within this gap

    std::size_t dim() const { return lo.size(); }
    void validate() const;
    std::vector<double> sample(Rng& rng) const;
};

std::string sampler_kind_name(CovariateSampler::Kind kind);
CovariateSampler::Kind sampler_kind_from_name(const std::string& name);

struct TruthSpec {
    ConditionalTruth match_truth;
    ConditionalTruth nonmatch_truth;
    CovariateSampler sampler;
    std::size_t n_match = 0;
    std::size_t n_nonmatch = 0;
    std::vector<std::string> covariate_names;  // pair-level, length sampler.dim()

    void validate() const;
};

// Match records first, then non-match, each (x, y) pair drawn i.i.d.
PairDataset generate(const TruthSpec& spec, std::uint64_t seed);

struct OraclePoint {
    std::vector<double> x;
    double value;
};

// Brute-force gold standard: at each gridpoint draw n_per_point scores per
// stream from the exact conditional truth and take the empirical metric.
std::vector<OraclePoint> oracle_grid(const TruthSpec& spec,
                                     const std::vector<std::vector<double>>& grid,
                                     BaselineMetric metric, double fpr,
                                     std::size_t n_per_point, std::uint64_t seed);

// Inclusive per-dimension linspace grid over the sampler's box.
std::vector<std::vector<double>> sampler_grid(const CovariateSampler& sampler,
                                              std::size_t points_per_dim);

// Self-comparison records under independent query/gallery covariate draws:
// score = effect(x_q ++ x_g) + N(0, noise_std), not truncated.
std::vector<PairRecord> preferred_view_stream(const TruthSpec& spec,
                                              const FnSpec& effect,
                                              double noise_std, std::size_t n,
                                              std::uint64_t seed);

// Exact conditional TPR at the given FPR under the truth (distance scores).
double truth_tpr(const ConditionalTruth& match, const ConditionalTruth& nonmatch,
                 const std::vector<double>& x, double fpr);

// Named synthetic designs: scale-ridge, binormal, calibration-1d, age-trend.
TruthSpec preset_truth(const std::string& name);
std::vector<std::string> preset_names();

nlohmann::json truth_to_json(const TruthSpec& spec);
TruthSpec truth_from_json(const nlohmann::json& j);

}  // namespace covaroc
