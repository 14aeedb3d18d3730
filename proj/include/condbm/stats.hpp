#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <utility>

#include "condbm/rng.hpp"

namespace condbm {

struct KsResult {
    double statistic; // D = sup |F_hat - F| (or sup |F_a - F_b|)
    double p_value;   // asymptotic Kolmogorov tail at sqrt(n_eff) * D
    double n_eff;     // n, or (sum w)^2 / sum w^2 for weighted samples
};

// Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2), the asymptotic
// Kolmogorov tail probability; Q(0+) = 1.
double kolmogorov_q(double lambda);

// Largest lambda with Q(lambda) >= alpha (bisection); the suite's fixed
// alpha = 0.001 corresponds to lambda ~ 1.9495.
double kolmogorov_critical(double alpha);

// One-sample KS against a continuous CDF. Weighted samples use the
// weight-fraction empirical CDF and N_eff = (sum w)^2 / sum w^2. Throws
// std::invalid_argument on empty input or a negative weight; zero weights
// are pruned first (they carry no mass, and the statistic is unchanged).
KsResult ks_one_sample(std::span<const double> sample,
                       const std::function<double(double)>& cdf,
                       std::span<const double> weights = {});

// Two-sample KS; effective sizes combine harmonically:
// n_eff = n_a n_b / (n_a + n_b).
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b,
                       std::span<const double> weights_a = {},
                       std::span<const double> weights_b = {});

struct SampleSummary {
    std::size_t n = 0;
    double mean = 0.0;
    double se = 0.0; // standard error of the mean
    double min = 0.0;
    double max = 0.0;
    double n_eff = 0.0; // == n for unweighted samples
};

SampleSummary summarize(std::span<const double> sample,
                        std::span<const double> weights = {});

// Percentile bootstrap interval for functional(sample); deterministic given
// the RngStream. Requires n_resamples >= 100 and a nonempty sample.
std::pair<double, double>
bootstrap_ci(std::span<const double> sample,
             const std::function<double(std::span<const double>)>& functional,
             std::size_t n_resamples, double level, RngStream& rng);

} // namespace condbm
