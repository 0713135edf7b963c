#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace covaroc {

inline constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

double normal_cdf(double z);
double log_normal_pdf(double y, double mean, double sigma);

double logsumexp(std::span<const double> values);

// Quantile of a sample with linear interpolation between order statistics.
// Input need not be sorted; prob in [0, 1].
double sample_quantile(std::vector<double> values, double prob);
double sample_median(std::vector<double> values);

double mean(std::span<const double> values);
// Population standard deviation (divide by n).
double population_std(std::span<const double> values);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

// Central (equal-tailed) interval holding `mass` of the draws.
Interval central_interval(const std::vector<double>& draws, double mass);

// Runs fn(0..n-1) on up to `workers` threads (0 = hardware concurrency).
// Iterations must be independent; results are deterministic regardless of
// the worker count because indices fully determine the work.
void parallel_for(std::size_t n, int workers,
                  const std::function<void(std::size_t)>& fn);

// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);

}  // namespace covaroc
