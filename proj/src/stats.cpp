#include "condbm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace condbm {

namespace {

[[noreturn]] void bad(const char* op, const char* what) {
    throw std::invalid_argument(std::string(op) + ": " + what);
}

// (value, weight) pairs with zero weights pruned; weights default to 1.
std::vector<std::pair<double, double>> weighted_points(const char* op,
                                                       std::span<const double> xs,
                                                       std::span<const double> ws) {
    if (xs.empty()) bad(op, "empty sample");
    if (!ws.empty() && ws.size() != xs.size()) bad(op, "weights/sample length mismatch");
    std::vector<std::pair<double, double>> pts;
    pts.reserve(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double w = ws.empty() ? 1.0 : ws[i];
        if (w < 0.0 || !std::isfinite(w)) bad(op, "weights must be nonnegative and finite");
        if (w == 0.0) continue; // carries no mass; statistic unchanged
        pts.emplace_back(xs[i], w);
    }
    if (pts.empty()) bad(op, "all weights are zero");
    std::sort(pts.begin(), pts.end());
    return pts;
}

double effective_size(const std::vector<std::pair<double, double>>& pts) {
    double sw = 0.0, sw2 = 0.0;
    for (const auto& [x, w] : pts) {
        sw += w;
        sw2 += w * w;
    }
    return sw * sw / sw2;
}

} // namespace

double kolmogorov_q(double lambda) {
    if (lambda <= 0.0) return 1.0;
    double s = 0.0;
    double sign = 1.0;
    for (int k = 1; k < 4000; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        s += sign * term;
        if (term < 1e-17) break;
        sign = -sign;
    }
    return std::min(1.0, std::max(0.0, 2.0 * s));
}

double kolmogorov_critical(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) bad("kolmogorov_critical", "alpha must be in (0,1)");
    double lo = 1e-8, hi = 10.0;
    for (int i = 0; i < 200; ++i) {
        const double m = 0.5 * (lo + hi);
        if (kolmogorov_q(m) >= alpha) lo = m;
        else hi = m;
    }
    return 0.5 * (lo + hi);
}

KsResult ks_one_sample(std::span<const double> sample,
                       const std::function<double(double)>& cdf,
                       std::span<const double> weights) {
    if (!cdf) bad("ks_one_sample", "no cdf");
    const auto pts = weighted_points("ks_one_sample", sample, weights);
    double sw = 0.0;
    for (const auto& [x, w] : pts) sw += w;

    double d = 0.0, acc = 0.0;
    std::size_t i = 0;
    while (i < pts.size()) {
        // group ties so the empirical step is taken once per distinct value
        const double x = pts[i].first;
        double wgroup = 0.0;
        for (; i < pts.size() && pts[i].first == x; ++i) wgroup += pts[i].second;
        const double f = cdf(x);
        const double pre = acc / sw;
        acc += wgroup;
        const double post = acc / sw;
        d = std::max(d, std::max(std::abs(f - pre), std::abs(post - f)));
    }
    const double n_eff = effective_size(pts);
    return {d, kolmogorov_q(std::sqrt(n_eff) * d), n_eff};
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b,
                       std::span<const double> weights_a,
                       std::span<const double> weights_b) {
    const auto pa = weighted_points("ks_two_sample", a, weights_a);
    const auto pb = weighted_points("ks_two_sample", b, weights_b);
    double swa = 0.0, swb = 0.0;
    for (const auto& [x, w] : pa) swa += w;
    for (const auto& [x, w] : pb) swb += w;

    double d = 0.0, ca = 0.0, cb = 0.0;
    std::size_t i = 0, j = 0;
    while (i < pa.size() || j < pb.size()) {
        const double xa = i < pa.size() ? pa[i].first
                                        : std::numeric_limits<double>::infinity();
        const double xb = j < pb.size() ? pb[j].first
                                        : std::numeric_limits<double>::infinity();
        const double x = std::min(xa, xb);
        while (i < pa.size() && pa[i].first == x) ca += pa[i++].second;
        while (j < pb.size() && pb[j].first == x) cb += pb[j++].second;
        d = std::max(d, std::abs(ca / swa - cb / swb));
    }
    const double na = effective_size(pa), nb = effective_size(pb);
    const double n_eff = na * nb / (na + nb);
    return {d, kolmogorov_q(std::sqrt(n_eff) * d), n_eff};
}

SampleSummary summarize(std::span<const double> sample, std::span<const double> weights) {
    const auto pts = weighted_points("summarize", sample, weights);
    SampleSummary s;
    s.n = sample.size();
    s.n_eff = effective_size(pts);
    double sw = 0.0, sx = 0.0;
    s.min = pts.front().first;
    s.max = pts.front().first;
    for (const auto& [x, w] : pts) {
        sw += w;
        sx += w * x;
        s.min = std::min(s.min, x);
        s.max = std::max(s.max, x);
    }
    s.mean = sx / sw;
    if (weights.empty()) {
        double ss = 0.0;
        for (const auto& [x, w] : pts) ss += (x - s.mean) * (x - s.mean);
        const std::size_t n = pts.size();
        s.se = n > 1 ? std::sqrt(ss / (static_cast<double>(n) * (n - 1.0))) : 0.0;
    } else {
        // linearized (ratio-estimator) standard error of the weighted mean,
        // Bessel-corrected through the effective size so that equal weights
        // reproduce the unweighted estimate
        double ss = 0.0;
        for (const auto& [x, w] : pts) ss += w * w * (x - s.mean) * (x - s.mean);
        s.se = s.n_eff > 1.0 ? std::sqrt(ss * s.n_eff / (s.n_eff - 1.0)) / sw : 0.0;
    }
    return s;
}

std::pair<double, double>
bootstrap_ci(std::span<const double> sample,
             const std::function<double(std::span<const double>)>& functional,
             std::size_t n_resamples, double level, RngStream& rng) {
    if (sample.empty()) bad("bootstrap_ci", "empty sample");
    if (!functional) bad("bootstrap_ci", "no functional");
    if (n_resamples < 100) bad("bootstrap_ci", "need at least 100 resamples");
    if (!(level > 0.0 && level < 1.0)) bad("bootstrap_ci", "level must be in (0,1)");

    const std::size_t n = sample.size();
    std::vector<double> resample(n), stats(n_resamples);
    for (std::size_t b = 0; b < n_resamples; ++b) {
        for (std::size_t i = 0; i < n; ++i) {
            auto idx = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n));
            resample[i] = sample[idx < n ? idx : n - 1];
        }
        stats[b] = functional(resample);
    }
    std::sort(stats.begin(), stats.end());
    const auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(n_resamples - 1);
        const auto k = static_cast<std::size_t>(pos);
        if (k + 1 >= n_resamples) return stats.back();
        const double frac = pos - static_cast<double>(k);
        return stats[k] + frac * (stats[k + 1] - stats[k]);
    };
    const double tail = 0.5 * (1.0 - level);
    return {quantile(tail), quantile(1.0 - tail)};
}

} // namespace condbm
