#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include <doctest.h>

#include "condbm/analytic.hpp"
#include "condbm/errors.hpp"
#include "condbm/grid.hpp"
#include "condbm/meander.hpp"
#include "condbm/rng.hpp"
#include "condbm/stats.hpp"

using namespace condbm;

namespace {

std::shared_ptr<const TimeGrid> shared(TimeGrid g) {
    return std::make_shared<const TimeGrid>(std::move(g));
}

std::shared_ptr<const TimeGrid> default_grid(double T) {
    return shared(make_grid_dt(T, 1e-3 * T, 1e-4 * T, 1e-6 * T, 6));
}

double rayleigh_cdf(double z) { return -std::expm1(-0.5 * z * z); }

double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

std::vector<double> endpoints(const MeanderEnsemble& ens) {
    std::vector<double> out;
    out.reserve(ens.paths.size());
    for (const auto& p : ens.paths) out.push_back(p.back());
    return out;
}

std::vector<double> weights(const MeanderEnsemble& ens) {
    std::vector<double> out;
    out.reserve(ens.paths.size());
    for (const auto& p : ens.paths) out.push_back(p.weight);
    return out;
}

} // namespace

TEST_CASE("meander SDE: entrance law, positivity, endpoint law") {
    const auto ens = sample_meander_ensemble("sde", 1.0, default_grid(1.0), 10000,
                                             kDefaultSeed, 0, 0);
    REQUIRE(ens.paths.size() == 10000);
    CHECK(ens.sampler == "sde");

    // every value strictly positive, grid shared across paths, endpoint at T
    const auto* grid0 = ens.paths.front().grid.get();
    for (const auto& p : ens.paths) {
        CHECK(p.grid.get() == grid0);
        CHECK(p.weight == 1.0);
        for (std::size_t k = 0; k < p.n_times(); ++k) CHECK(p.value(k) > 0.0);
    }
    CHECK(grid0->back() == 1.0);
    CHECK(grid0->front() == 1e-4);

    // first value: for s << T the entrance law standardizes to chi(3)
    // (Maxwell) in z / sqrt(s)
    std::vector<double> first;
    first.reserve(ens.paths.size());
    for (const auto& p : ens.paths) first.push_back(p.value(0) / 1e-2);
    const auto ks0 = ks_one_sample(first, [](double v) {
        return std::erf(v / std::sqrt(2.0)) -
               std::sqrt(2.0 / M_PI) * v * std::exp(-0.5 * v * v);
    });
    CHECK(ks0.p_value > 0.001);

    // endpoint: Rayleigh, mean sqrt(pi/2)
    const auto ends = endpoints(ens);
    CHECK(ks_one_sample(ends, rayleigh_cdf).p_value > 0.001);
    const auto s = summarize(ends);
    CHECK(std::abs(s.mean - kSqrtPiOver2) <= 3.0 * s.se + 2e-3);
}

TEST_CASE("Bessel-3 sampler carries the exact importance weight") {
    const auto ens = sample_meander_ensemble("bessel", 1.0, default_grid(1.0),
                                             20000, kDefaultSeed, 1 << 20, 0);
    for (const auto& p : ens.paths)
        CHECK(p.weight == imhof_weight(1.0, p.back()));

    const auto w = weights(ens);
    const auto sw = summarize(w);
    CHECK(std::abs(sw.mean - 1.0) <= 3.0 * sw.se); // E[w] = gamma-normalization = 1

    // unweighted endpoint is Bessel-3: E[Z_T^2] = 3T
    std::vector<double> sq;
    sq.reserve(ens.paths.size());
    for (const auto& p : ens.paths) sq.push_back(p.back() * p.back());
    const auto ssq = summarize(sq);
    CHECK(std::abs(ssq.mean - 3.0) <= 3.0 * ssq.se);

    // weighted endpoint recovers the meander's Rayleigh law
    const auto ks = ks_one_sample(endpoints(ens), rayleigh_cdf, w);
    CHECK(ks.p_value > 0.001);
    CHECK(ks.n_eff < 20000.0); // weighting costs effective size
    CHECK(ks.n_eff > 10000.0);
}

TEST_CASE("rejection sampler acceptance rate matches the survival probability") {
    const double y0 = 0.25, dt = 1e-3;
    const auto ens =
        sample_meander_ensemble("rejection", 1.0, shared(make_grid_dt(1.0, dt, 0.0, 0.0, 0)),
                                2000, kDefaultSeed, 2 << 20, 0, y0);
    CHECK(ens.y0 == y0);
    REQUIRE(ens.acceptance_rate > 0.0);
    for (const auto& p : ens.paths) {
        CHECK(p.retries >= 1); // attempt count
        for (std::size_t k = 0; k < p.n_times(); ++k) CHECK(p.value(k) > 0.0);
    }
    // discrete monitoring accepts slightly more than gamma(T, y0); the
    // boundary-shift heuristic bounds the excess
    const double lo = exit_prob(DomainSpec{HalfLine{}}, 1.0, y0);
    const double hi = exit_prob(DomainSpec{HalfLine{}}, 1.0,
                                y0 + 0.5826 * std::sqrt(dt));
    const double n_attempts = 2000.0 / ens.acceptance_rate;
    const double se = std::sqrt(lo * (1.0 - lo) / n_attempts);
    CHECK(ens.acceptance_rate >= lo - 3.0 * se);
    CHECK(ens.acceptance_rate <= hi + 3.0 * se);
}

TEST_CASE("rejection from y0 = 1 is the taboo law, not the meander") {
    // reflection formula: F(z) = [Phi(z-1) - Phi(z+1) + 2 Phi(1) - 1] / gamma(1,1)
    const auto ens =
        sample_meander_ensemble("rejection", 1.0, shared(make_grid_dt(1.0, 1e-4, 0.0, 0.0, 0)),
                                5000, kDefaultSeed, 30 << 20, 0, 1.0);
    const auto ends = endpoints(ens);
    const double gamma11 = exit_prob(DomainSpec{HalfLine{}}, 1.0, 1.0);
    const auto taboo_cdf = [gamma11](double z) {
        if (z <= 0.0) return 0.0;
        return (phi_cdf(z - 1.0) - phi_cdf(z + 1.0) + 2.0 * phi_cdf(1.0) - 1.0) /
               gamma11;
    };
    CHECK(ks_one_sample(ends, taboo_cdf).p_value > 0.001);
    // and it is decisively NOT Rayleigh (power check)
    CHECK(ks_one_sample(ends, rayleigh_cdf).p_value < 1e-6);
}

TEST_CASE("Brownian scaling: meander(4) / 2 is meander(1)") {
    // the T=4 grid is the scaled T=1 grid, so discretization bias scales too
    const auto a = sample_meander_ensemble("sde", 4.0, default_grid(4.0), 5000,
                                           kDefaultSeed, 4 << 20, 0);
    const auto b = sample_meander_ensemble("sde", 1.0, default_grid(1.0), 5000,
                                           kDefaultSeed, 5 << 20, 0);
    auto ea = endpoints(a);
    for (auto& z : ea) z *= 0.5;
    const auto ks = ks_two_sample(ea, endpoints(b));
    CHECK(ks.p_value > 0.001);
}

TEST_CASE("path functionals agree between the SDE and weighted Bessel laws") {
    const auto grid = default_grid(1.0);
    const auto a = sample_meander_ensemble("sde", 1.0, grid, 5000, kDefaultSeed,
                                           6 << 20, 0);
    const auto b = sample_meander_ensemble("bessel", 1.0, grid, 5000,
                                           kDefaultSeed, 7 << 20, 0);
    const auto wb = weights(b);

    const auto late_min = [](const PathRealization& p) {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < p.n_times(); ++k)
            if (p.time(k) >= 0.5) m = std::min(m, p.value(k));
        return m;
    };
    const auto time_avg = [](const PathRealization& p) {
        double acc = 0.0;
        for (std::size_t k = 0; k + 1 < p.n_times(); ++k)
            acc += 0.5 * (p.value(k) + p.value(k + 1)) * (p.time(k + 1) - p.time(k));
        return acc / (p.time(p.n_times() - 1) - p.time(0));
    };

    const std::vector<std::function<double(const PathRealization&)>> functionals{
        late_min, time_avg};
    for (const auto& functional : functionals) {
        std::vector<double> fa, fb;
        for (const auto& p : a.paths) fa.push_back(functional(p));
        for (const auto& p : b.paths) fb.push_back(functional(p));
        const auto ks = ks_two_sample(fa, fb, {}, wb);
        CHECK(ks.p_value > 0.001);
    }
}

TEST_CASE("lemma1_rhs endpoint values, frozen references, continuity") {
    CHECK(lemma1_rhs(1.0, 1.0) == doctest::Approx(kSqrtPiOver2).epsilon(1e-9));
    CHECK(lemma1_rhs(1.0, 1e-9) < 1e-3);
    // 40-digit quadrature references
    CHECK(lemma1_rhs(1.0, 0.25) ==
          doctest::Approx(0.76326552857650223).epsilon(1e-8));
    CHECK(lemma1_rhs(1.0, 0.5) ==
          doctest::Approx(1.0255993490591828).epsilon(1e-8));
    CHECK(lemma1_rhs(1.0, 0.75) ==
          doctest::Approx(1.1810369076816690).epsilon(1e-8));
    CHECK(lemma1_rhs(1.0, 0.5 + 1e-6) ==
          doctest::Approx(lemma1_rhs(1.0, 0.5)).epsilon(1e-5));
    CHECK_THROWS_AS(lemma1_rhs(1.0, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(lemma1_rhs(1.0, 1.1), std::invalid_argument);
}

TEST_CASE("ensembles are deterministic and thread-count independent") {
    const auto grid = default_grid(1.0);
    for (const char* method : {"sde", "bessel"}) {
        const auto a = sample_meander_ensemble(method, 1.0, grid, 100,
                                               kDefaultSeed, 8 << 20, 1);
        const auto b = sample_meander_ensemble(method, 1.0, grid, 100,
                                               kDefaultSeed, 8 << 20, 4);
        REQUIRE(a.paths.size() == b.paths.size());
        for (std::size_t i = 0; i < a.paths.size(); ++i) {
            CHECK(a.paths[i].values == b.paths[i].values);
            CHECK(a.paths[i].weight == b.paths[i].weight);
            CHECK(a.paths[i].stream == b.paths[i].stream);
        }
        // a different stream base shifts everything
        const auto c = sample_meander_ensemble(method, 1.0, grid, 100,
                                               kDefaultSeed, 9 << 20, 1);
        CHECK(a.paths[0].values != c.paths[0].values);
    }
    CHECK_THROWS_AS(sample_meander_ensemble("no-such", 1.0, grid, 10,
                                            kDefaultSeed, 0, 1),
                    std::invalid_argument);
}

TEST_CASE("rejection attempt budget") {
    // from y0 = 1e-6 an everywhere-positive path is unreachable in practice,
    // so a tiny budget must raise
    const auto grid = shared(make_grid_dt(1.0, 1e-3, 0.0, 0.0, 0));
    RngStream rng(kDefaultSeed, 10 << 20);
    CHECK_THROWS_AS(sample_meander_rejection(1.0, 1e-6, grid, rng, 3),
                    AttemptsExhausted);
    CHECK_THROWS_AS(sample_meander_ensemble("rejection", 1.0, grid, 5,
                                            kDefaultSeed, 10 << 20, 0, 1e-6, 3),
                    AttemptsExhausted);
}
