#include "condbm/meander.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "condbm/analytic.hpp"
#include "condbm/errors.hpp"
#include "condbm/parallel.hpp"

namespace condbm {

namespace {

// Inverse-CDF table for the entrance law. The density behaves like c z^2 at
// the origin, so the quantile function z(u) ~ u^{1/3}: tabulating in
// r = (u/u_max)^{1/3} with nodes u_i = u_max (i/4095)^3 makes z(r) linear
// near 0 and uniformly smooth, and the cell lookup stays O(1). The last few
// cells are wide in u (the cube map compresses the tail), so draws beyond
// kPolish get a Newton refinement against the density; everywhere the
// inverse then matches quadrature inversion to ~1e-8.
struct EntranceTable {
    static constexpr std::size_t kNodes = 4096;
    static constexpr double kUMax = 1.0 - 0x1.0p-24; // draws above are clamped
    static constexpr std::size_t kPolish = kNodes - 4;

    double T = 0.0, s = 0.0;
    double u_polish = 1.0; // node-kPolish quantile level
    std::vector<double> z; // quantile at u_i
    std::vector<double> m; // dz/dr, monotonicity-clamped

    double sample(double u) const {
        u = std::clamp(u, 0.0, kUMax);
        const double r = std::cbrt(u / kUMax);
        const double h = 1.0 / static_cast<double>(kNodes - 1);
        const auto i =
            std::min(kNodes - 2, static_cast<std::size_t>(r * (kNodes - 1)));
        const double v = (r - static_cast<double>(i) * h) / h;
        const double v2 = v * v, v3 = v2 * v;
        const double zhat = z[i] * (2.0 * v3 - 3.0 * v2 + 1.0) +
                            h * m[i] * (v3 - 2.0 * v2 + v) +
                            z[i + 1] * (-2.0 * v3 + 3.0 * v2) +
                            h * m[i + 1] * (v3 - v2);
        if (u <= u_polish) return zhat;

        // far tail (~0.2% of draws): Newton in log-survival anchored at the
        // node-kPolish quantile (the tail is Gaussian-type, so log S is
        // nearly quadratic in z and the iteration is monotone and fast)
        using gauss15 = boost::math::quadrature::gauss<double, 15>;
        const auto f = [this](double zz) {
            return meander_entrance_density(T, s, zz);
        };
        const double za = z[kPolish];
        const double z_cap = 13.0 * std::sqrt(s);
        const double surv_a = 1.0 - u_polish;
        const double target = 1.0 - u; // >= 2^-24 after the clamp above
        double zz = std::clamp(zhat, za, z_cap);
        for (int it = 0; it < 6; ++it) {
            const double surv =
                std::max(surv_a - gauss15::integrate(f, za, zz), 1e-300);
            zz += std::log(surv / target) * surv / std::max(f(zz), 1e-300);
            zz = std::clamp(zz, za, z_cap);
        }
        return zz;
    }
};

EntranceTable build_entrance_table(double T, double s) {
    using gauss7 = boost::math::quadrature::gauss<double, 7>;
    const auto f = [T, s](double zz) { return meander_entrance_density(T, s, zz); };

    // Fine cumulative mesh; mass beyond 12 sqrt(s) is < 1e-30.
    const std::size_t n_fine = 32768;
    const double z_hi = 12.0 * std::sqrt(s);
    const double hz = z_hi / static_cast<double>(n_fine);
    std::vector<double> cum(n_fine + 1, 0.0);
    for (std::size_t j = 1; j <= n_fine; ++j)
        cum[j] = cum[j - 1] +
                 gauss7::integrate(f, hz * static_cast<double>(j - 1),
                                   hz * static_cast<double>(j));

    EntranceTable tab;
    tab.T = T;
    tab.s = s;
    {
        const double rp = static_cast<double>(EntranceTable::kPolish) /
                          (EntranceTable::kNodes - 1);
        tab.u_polish = EntranceTable::kUMax * rp * rp * rp;
    }
    tab.z.assign(EntranceTable::kNodes, 0.0);
    tab.m.assign(EntranceTable::kNodes, 0.0);

    for (std::size_t i = 1; i < EntranceTable::kNodes; ++i) {
        const double ri = static_cast<double>(i) / (EntranceTable::kNodes - 1);
        const double u = EntranceTable::kUMax * ri * ri * ri;
        const auto j = static_cast<std::size_t>(
            std::upper_bound(cum.begin(), cum.end(), u) - cum.begin() - 1);
        // linear seed inside the cell, then Newton on C(z) - u
        double zz = hz * (static_cast<double>(j) +
                          (u - cum[j]) / std::max(cum[j + 1] - cum[j], 1e-300));
        for (int it = 0; it < 4; ++it) {
            const double cz =
                cum[j] + gauss7::integrate(f, hz * static_cast<double>(j), zz);
            zz -= (cz - u) / std::max(f(zz), 1e-300);
            zz = std::clamp(zz, hz * static_cast<double>(j),
                            hz * static_cast<double>(j + 1));
        }
        tab.z[i] = zz;
        tab.m[i] = 3.0 * EntranceTable::kUMax * ri * ri / f(zz);
    }
    // analytic slope at the origin from f(z) -> c z^2
    const double z_tiny = 1e-6 * std::sqrt(s);
    const double c = f(z_tiny) / (z_tiny * z_tiny);
    tab.m[0] = std::cbrt(3.0 * EntranceTable::kUMax / c);

    // Fritsch-Carlson clamp keeps the interpolant monotone.
    const double hr = 1.0 / static_cast<double>(EntranceTable::kNodes - 1);
    for (std::size_t i = 0; i < EntranceTable::kNodes; ++i) {
        const double dl = i > 0 ? (tab.z[i] - tab.z[i - 1]) / hr
                                : std::numeric_limits<double>::infinity();
        const double dr = i + 1 < EntranceTable::kNodes
                              ? (tab.z[i + 1] - tab.z[i]) / hr
                              : std::numeric_limits<double>::infinity();
        tab.m[i] = std::clamp(tab.m[i], 0.0, 3.0 * std::min(dl, dr));
    }
    return tab;
}

const EntranceTable& entrance_table(double T, double s) {
    static std::mutex mu;
    static std::map<std::pair<double, double>, std::shared_ptr<const EntranceTable>>
        cache;
    const std::pair<double, double> key{T, s};
    {
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find(key);
        if (it != cache.end()) return *it->second;
    }
    auto built = std::make_shared<const EntranceTable>(build_entrance_table(T, s));
    std::lock_guard<std::mutex> lock(mu);
    auto [it, inserted] = cache.emplace(key, std::move(built));
    return *it->second;
}

} // namespace

double entrance_sample(double T, double eps0, double u) {
    if (!(T > 0.0) || !(eps0 > 0.0) || !(eps0 < T))
        throw std::invalid_argument("entrance_sample: need 0 < eps0 < T");
    return entrance_table(T, eps0).sample(u);
}

PathRealization sample_meander_sde(double T, std::shared_ptr<const TimeGrid> grid,
                                   RngStream& rng) {
    if (!(T > 0.0)) throw std::invalid_argument("sample_meander_sde: T must be positive");
    auto g = with_terminal(std::move(grid), T);
    const double t0 = g->front();
    if (!(t0 > 0.0))
        throw std::invalid_argument("sample_meander_sde: grid must start after 0");

    const double z = entrance_sample(T, t0, rng.uniform());
    static const DomainSpec half_line{HalfLine{}};
    const DriftField drift = [T](double t, std::span<const double> y,
                                 std::span<double> out) {
        out[0] = halfline_drift(T - t, y[0]);
    };
    RetryPolicy policy;
    policy.drift_step_cap = 1.0; // tames the explicit-Euler kick from y << sqrt(dt)
    auto path = euler_maruyama(drift, &half_line, std::span<const double>(&z, 1),
                               std::move(g), rng, policy);
    path.tag = "sde";
    return path;
}

PathRealization sample_meander_bessel(double T, std::shared_ptr<const TimeGrid> grid,
                                      RngStream& rng) {
    if (!(T > 0.0))
        throw std::invalid_argument("sample_meander_bessel: T must be positive");
    auto g = with_terminal(std::move(grid), T);

    PathRealization path;
    path.dim = 1;
    path.grid = g;
    path.values.reserve(g->n_times());
    path.seed = rng.seed();
    path.stream = rng.stream();
    path.tag = "bessel";

    double w[3] = {0.0, 0.0, 0.0};
    double t_prev = 0.0;
    for (std::size_t k = 0; k < g->n_times(); ++k) {
        const double dt = g->t[k] - t_prev;
        t_prev = g->t[k];
        if (dt > 0.0) {
            const double sdt = std::sqrt(dt);
            for (double& c : w) c += sdt * rng.gaussian();
        }
        path.values.push_back(std::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]));
    }
    path.weight = imhof_weight(T, path.values.back());
    return path;
}

PathRealization sample_meander_rejection(double T, double y0,
                                         std::shared_ptr<const TimeGrid> grid,
                                         RngStream& rng, std::size_t max_attempts) {
    if (!(T > 0.0))
        throw std::invalid_argument("sample_meander_rejection: T must be positive");
    if (!(y0 > 0.0))
        throw std::invalid_argument("sample_meander_rejection: y0 must be positive");
    auto g = with_origin(with_terminal(std::move(grid), T));
    const std::size_t n = g->n_times();

    std::vector<double> vals(n);
    for (std::size_t attempt = 1; attempt <= max_attempts; ++attempt) {
        vals[0] = y0;
        double y = y0;
        bool alive = true;
        for (std::size_t k = 1; k < n; ++k) {
            y += std::sqrt(g->t[k] - g->t[k - 1]) * rng.gaussian();
            if (y <= 0.0) {
                alive = false;
                break;
            }
            vals[k] = y;
        }
        if (alive) {
            PathRealization path;
            path.dim = 1;
            path.grid = std::move(g);
            path.values = std::move(vals);
            path.seed = rng.seed();
            path.stream = rng.stream();
            path.retries = attempt;
            path.tag = "rejection";
            return path;
        }
    }
    throw AttemptsExhausted("sample_meander_rejection", max_attempts);
}

double lemma1_rhs(double T, double t) {
    if (!(T > 0.0)) throw std::invalid_argument("lemma1_rhs: T must be positive");
    if (!(t >= 0.0 && t <= T)) throw std::invalid_argument("lemma1_rhs: t must be in [0,T]");
    const double st = std::sqrt(t);
    const double s = T - t;
    const auto f = [st, s](double y) {
        const double gam = s > 0.0 ? std::erf(st * y / std::sqrt(2.0 * s)) : 1.0;
        return y * y * std::exp(-0.5 * y * y) * gam;
    };
    return std::sqrt(T) *
           boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
               f, 0.0, std::numeric_limits<double>::infinity(), 15, 1e-12);
}

MeanderEnsemble sample_meander_ensemble(const std::string& method, double T,
                                        std::shared_ptr<const TimeGrid> grid,
                                        std::size_t n_paths, std::uint64_t seed,
                                        std::uint64_t stream_base, unsigned threads,
                                        double y0, std::size_t max_attempts) {
    if (n_paths == 0)
        throw std::invalid_argument("sample_meander_ensemble: need at least one path");
    if (method != "sde" && method != "bessel" && method != "rejection")
        throw std::invalid_argument("sample_meander_ensemble: unknown method '" +
                                    method + "'");

    // One shared stitched grid for every path (the per-path calls then
    // extend it as a no-op), and a pre-built entrance table so the first
    // paths don't race on the cache mutex.
    std::shared_ptr<const TimeGrid> g = with_terminal(std::move(grid), T);
    if (method == "rejection") g = with_origin(std::move(g));
    if (method == "sde") (void)entrance_sample(T, g->front(), 0.5);
    if (method == "rejection" && y0 <= 0.0) y0 = 1e-3 * std::sqrt(T);

    MeanderEnsemble ens;
    ens.paths.resize(n_paths);
    ens.horizon = T;
    ens.sampler = method;
    ens.y0 = method == "rejection" ? y0 : 0.0;

    parallel_for(n_paths, threads, [&](std::size_t i) {
        RngStream rng(seed, stream_base + i);
        if (method == "sde") {
            ens.paths[i] = sample_meander_sde(T, g, rng);
        } else if (method == "bessel") {
            ens.paths[i] = sample_meander_bessel(T, g, rng);
        } else {
            ens.paths[i] = sample_meander_rejection(T, y0, g, rng, max_attempts);
        }
    });

    if (method == "rejection") {
        double attempts = 0.0;
        for (const auto& p : ens.paths) attempts += static_cast<double>(p.retries);
        ens.acceptance_rate = static_cast<double>(n_paths) / attempts;
    }
    return ens;
}

} // namespace condbm
