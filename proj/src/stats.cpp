#include "covaroc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <thread>

#include "covaroc/error.hpp"

namespace covaroc {

double normal_cdf(double z) {
    return 0.5 * std::erfc(-z * 0.7071067811865475244);
}

double log_normal_pdf(double y, double mean, double sigma) {
    const double z = (y - mean) / sigma;
    return -0.5 * z * z - std::log(sigma) - 0.5 * kLogTwoPi;
}

double logsumexp(std::span<const double> values) {
    if (values.empty()) return -INFINITY;
    double m = values[0];
    for (double v : values) m = std::max(m, v);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double v : values) s += std::exp(v - m);
    return m + std::log(s);
}

double sample_quantile(std::vector<double> values, double prob) {
    if (values.empty())
        throw Error(ErrorKind::Precondition, "sample_quantile: empty sample");
    prob = std::clamp(prob, 0.0, 1.0);
    std::sort(values.begin(), values.end());
    const double h = prob * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = h - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

double sample_median(std::vector<double> values) {
    return sample_quantile(std::move(values), 0.5);
}

double mean(std::span<const double> values) {
    if (values.empty())
        throw Error(ErrorKind::Precondition, "mean: empty sample");
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

double population_std(std::span<const double> values) {
    const double m = mean(values);
    double s = 0.0;
    for (double v : values) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(values.size()));
}

Interval central_interval(const std::vector<double>& draws, double mass) {
    if (mass <= 0.0 || mass >= 1.0)
        throw Error(ErrorKind::Config, "interval mass must lie in (0,1)");
    const double tail = 0.5 * (1.0 - mass);
    return {sample_quantile(draws, tail), sample_quantile(draws, 1.0 - tail)};
}

void parallel_for(std::size_t n, int workers,
                  const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    std::size_t nthreads = workers > 0
                               ? static_cast<std::size_t>(workers)
                               : std::max(1u, std::thread::hardware_concurrency());
    nthreads = std::min(nthreads, n);
    if (nthreads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (std::size_t t = 0; t < nthreads; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < n; i += nthreads) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

std::string format_double(double v) {
    // Shortest representation that still round-trips. Later precisions can
    // print fewer characters (30 needs two significant digits to avoid
    // scientific notation), so scan them all.
    std::string best;
    for (int prec = 1; prec <= 17; ++prec) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        double back = 0.0;
        std::sscanf(buf, "%lf", &back);
        if (back != v) continue;
        if (best.empty() || std::strlen(buf) < best.size()) best = buf;
    }
    if (!best.empty()) return best;
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace covaroc
