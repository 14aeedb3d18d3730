#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "condbm/analytic.hpp"
#include "condbm/errors.hpp"
#include "condbm/grid.hpp"
#include "condbm/rng.hpp"
#include "condbm/sde.hpp"
#include "condbm/stats.hpp"

using namespace condbm;

namespace {

std::shared_ptr<const TimeGrid> shared(TimeGrid g) {
    return std::make_shared<const TimeGrid>(std::move(g));
}

const DomainSpec kHalf{HalfLine{}};

double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

} // namespace

TEST_CASE("make_grid uniform") {
    const TimeGrid g = make_grid(1.0, 4, 0.0, 0.0, 0);
    REQUIRE(g.n_times() == 5);
    CHECK(g.t[0] == 0.0);
    CHECK(g.t[1] == 0.25);
    CHECK(g.t[2] == 0.5);
    CHECK(g.t[3] == 0.75);
    CHECK(g.t[4] == 1.0);
    CHECK(g.n_steps() == 4);
    CHECK(g.dt_max == 0.25);
    CHECK(g.horizon == 1.0);
}

TEST_CASE("make_grid endpoint refinement") {
    const TimeGrid g = make_grid(1.0, 4, 0.0, 1e-6, 3);
    // one refined endpoint: 4 uniform + 3 halving steps
    REQUIRE(g.n_steps() == 7);
    CHECK(g.front() == 0.0);
    CHECK(g.back() == doctest::Approx(1.0 - 1e-6).epsilon(1e-12));
    for (std::size_t k = 1; k < g.n_times(); ++k) CHECK(g.t[k] > g.t[k - 1]);
    // the final steps shrink geometrically toward the cut
    const auto step = [&](std::size_t k) { return g.t[k + 1] - g.t[k]; };
    CHECK(step(5) < step(4));
    CHECK(step(6) < step(5));
    CHECK(step(5) == doctest::Approx(0.5 * step(4)).epsilon(1e-6));

    const TimeGrid both = make_grid(1.0, 4, 1e-4, 1e-6, 2);
    CHECK(both.n_steps() == 8); // 4 uniform + 2 per refined endpoint
    CHECK(both.front() == 1e-4);
    CHECK(both.back() == doctest::Approx(1.0 - 1e-6).epsilon(1e-12));
}

TEST_CASE("make_grid_dt bounds the step") {
    for (const double dt : {1e-3, 3.7e-4}) {
        const TimeGrid g = make_grid_dt(1.0, dt, 1e-4, 1e-6, 6);
        CHECK(g.front() == 1e-4);
        CHECK(g.back() == doctest::Approx(1.0 - 1e-6).epsilon(1e-12));
        for (std::size_t k = 0; k + 1 < g.n_times(); ++k)
            CHECK(g.t[k + 1] - g.t[k] <= dt * (1.0 + 1e-12));
    }
}

TEST_CASE("make_grid_graded bounds the relative step") {
    const TimeGrid g = make_grid_graded(1.0, 1e-3, 1.5e-6, 1.0 / 32.0);
    CHECK(g.front() == 1.5e-6);
    CHECK(g.back() == 1.0);
    for (std::size_t k = 0; k + 1 < g.n_times(); ++k) {
        const double dt = g.t[k + 1] - g.t[k];
        CHECK(dt > 0.0);
        CHECK(dt <= std::max(g.t[k] / 32.0, 1e-3) * (1.0 + 1e-12));
    }
    // geometric head (~log(dt/t0/growth)/log(1+growth) nodes) plus the
    // uniform tail; an absurd count would mean the phases are mis-stitched
    CHECK(g.n_steps() > 1000);
    CHECK(g.n_steps() < 2000);

    // degenerate: growth 1 with a coarse cap collapses to the uniform grid
    const TimeGrid u = make_grid_graded(1.0, 0.25, 0.5, 1.0);
    CHECK(u.front() == 0.5);
    CHECK(u.back() == 1.0);
}

TEST_CASE("grid validation") {
    CHECK_THROWS_AS(make_grid(0.0, 4, 0.0, 0.0, 0), std::invalid_argument);
    CHECK_THROWS_AS(make_grid(1.0, 0, 0.0, 0.0, 0), std::invalid_argument);
    CHECK_THROWS_AS(make_grid(1.0, 4, 0.6, 0.5, 0), std::invalid_argument);
    CHECK_THROWS_AS(make_grid(1.0, 4, -1e-3, 0.0, 0), std::invalid_argument);
    CHECK_THROWS_AS(make_grid_dt(1.0, 0.0, 0.0, 0.0, 0), std::invalid_argument);
    CHECK_THROWS_AS(make_grid_graded(1.0, 1e-3, 0.0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(make_grid_graded(1.0, 1e-3, 2.0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(make_grid_graded(1.0, 1e-3, 1e-6, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(make_grid_graded(1.0, 1e-3, 1e-6, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(make_grid_graded(1.0, 0.0, 1e-6, 0.5), std::invalid_argument);
}

TEST_CASE("with_terminal and with_origin") {
    const auto g = shared(make_grid(1.0, 10, 1e-4, 1e-6, 0));
    const auto wt = with_terminal(g, 1.0);
    REQUIRE(wt->n_times() == g->n_times() + 1);
    CHECK(wt->back() == 1.0);
    CHECK(with_terminal(wt, 1.0) == wt); // already there: same object

    const auto wo = with_origin(g);
    REQUIRE(wo->n_times() == g->n_times() + 1);
    CHECK(wo->front() == 0.0);
    CHECK(with_origin(wo) == wo);

    CHECK_THROWS_AS(with_terminal(g, 0.5), std::invalid_argument);
}

TEST_CASE("euler_maruyama: zero drift gives iid Gaussian increments") {
    const auto g = shared(make_grid(1.0, 100000, 0.0, 0.0, 0));
    RngStream rng(kDefaultSeed, 81001);
    const DriftField none = [](double, std::span<const double>,
                               std::span<double> out) { out[0] = 0.0; };
    const double x0 = 0.0;
    const auto path =
        euler_maruyama(none, nullptr, std::span<const double>(&x0, 1), g, rng);
    REQUIRE(path.n_times() == g->n_times());
    CHECK(path.retries == 0);
    CHECK(path.weight == 1.0);

    const double sdt = std::sqrt(g->dt_max);
    std::vector<double> incr(path.n_times() - 1);
    for (std::size_t k = 0; k + 1 < path.n_times(); ++k)
        incr[k] = (path.value(k + 1) - path.value(k)) / sdt;
    const auto ks = ks_one_sample(incr, phi_cdf);
    CHECK(ks.p_value > 0.001);
}

TEST_CASE("euler_maruyama: constant drift shifts the mean") {
    const auto g = shared(make_grid(1.0, 10, 0.0, 0.0, 0));
    const DriftField two = [](double, std::span<const double>,
                              std::span<double> out) { out[0] = 2.0; };
    const std::size_t n = 4000;
    std::vector<double> ends(n);
    for (std::size_t i = 0; i < n; ++i) {
        RngStream rng(kDefaultSeed, 82001 + i);
        const double x0 = 0.0;
        ends[i] = euler_maruyama(two, nullptr, std::span<const double>(&x0, 1), g,
                                 rng)
                      .back();
    }
    const auto s = summarize(ends);
    CHECK(std::abs(s.mean - 2.0) <= 3.0 * s.se);
    CHECK(s.se == doctest::Approx(1.0 / std::sqrt(double(n))).epsilon(0.1));
}

TEST_CASE("euler_maruyama: meander drift rarely needs redraws at dt=1e-3") {
    // started well inside the domain, the conditioned drift keeps the path
    // away from 0 and the enforcement machinery should be almost idle
    const auto g = shared(make_grid_dt(1.0, 1e-3, 0.0, 1e-3, 0));
    const DriftField cond = [](double t, std::span<const double> y,
                               std::span<double> out) {
        out[0] = halfline_drift(1.0 - t, y[0]);
    };
    RetryPolicy policy;
    policy.drift_step_cap = 1.0;
    std::size_t retries = 0, steps = 0;
    for (std::size_t i = 0; i < 200; ++i) {
        RngStream rng(kDefaultSeed, 83001 + i);
        const double x0 = 0.5;
        const auto p = euler_maruyama(cond, &kHalf,
                                      std::span<const double>(&x0, 1), g, rng,
                                      policy);
        retries += p.retries;
        steps += p.n_times() - 1;
        for (std::size_t k = 0; k < p.n_times(); ++k) CHECK(p.value(k) > 0.0);
    }
    CHECK(double(retries) / double(steps) < 0.01);
}

TEST_CASE("euler_maruyama is deterministic in (seed, stream)") {
    const auto g = shared(make_grid(1.0, 100, 0.0, 0.0, 0));
    const DriftField none = [](double, std::span<const double>,
                               std::span<double> out) { out[0] = 0.0; };
    const double x0 = 1.0;
    RngStream a(123, 5), b(123, 5), c(123, 6);
    const auto pa =
        euler_maruyama(none, &kHalf, std::span<const double>(&x0, 1), g, a);
    const auto pb =
        euler_maruyama(none, &kHalf, std::span<const double>(&x0, 1), g, b);
    const auto pc =
        euler_maruyama(none, &kHalf, std::span<const double>(&x0, 1), g, c);
    CHECK(pa.values == pb.values);
    CHECK(pa.values != pc.values);
}

TEST_CASE("euler_maruyama rejects a non-finite drift") {
    const auto g = shared(make_grid(1.0, 10, 0.0, 0.0, 0));
    const DriftField bad = [](double, std::span<const double>,
                              std::span<double> out) {
        out[0] = std::numeric_limits<double>::quiet_NaN();
    };
    RngStream rng(kDefaultSeed, 84001);
    const double x0 = 1.0;
    CHECK_THROWS_AS(euler_maruyama(bad, nullptr,
                                   std::span<const double>(&x0, 1), g, rng),
                    NonFiniteDrift);
}

TEST_CASE("euler_maruyama gives up when the domain cannot be held") {
    // drift * dt ~ -1e6 even at the deepest halving level: no Gaussian can
    // rescue the step, so this fails deterministically
    const auto g = shared(make_grid(1.0, 1000, 0.0, 0.0, 0));
    const DriftField plunge = [](double, std::span<const double>,
                                 std::span<double> out) { out[0] = -1e9; };
    RngStream rng(kDefaultSeed, 85001);
    const double x0 = 1.0;
    CHECK_THROWS_AS(euler_maruyama(plunge, &kHalf,
                                   std::span<const double>(&x0, 1), g, rng),
                    ExitFailure);
}

TEST_CASE("euler_maruyama halves the step near a hostile boundary") {
    // drift * dt = -0.2 from y0 = 0.05: full steps exit almost surely, so
    // halvings must engage; the path still ends valid and finer than the grid
    const auto g = shared(make_grid(1.0, 1000, 0.0, 0.0, 0));
    const DriftField push = [](double, std::span<const double>,
                               std::span<double> out) { out[0] = -200.0; };
    RngStream rng(kDefaultSeed, 86001);
    const double x0 = 0.05;
    const auto p = euler_maruyama(push, &kHalf, std::span<const double>(&x0, 1),
                                  g, rng);
    CHECK(p.n_times() > g->n_times());
    CHECK(p.retries > 0);
    CHECK(p.grid != g); // halvings insert grid points
    for (std::size_t k = 1; k < p.n_times(); ++k) {
        CHECK(p.time(k) > p.time(k - 1));
        CHECK(p.value(k) > 0.0);
    }
    CHECK(p.time(p.n_times() - 1) == g->back());
}

TEST_CASE("euler_maruyama bias is first order in dt (OU drift)") {
    // dX = -X dt + dW from x0 = 1: the Euler scheme's terminal mean is
    // exactly (1-dt)^n, so its bias against e^{-1} is in closed form and the
    // first-order decay can be checked without Monte Carlo noise.
    const double exact = std::exp(-1.0);
    const DriftField ou = [](double, std::span<const double> y,
                             std::span<double> out) { out[0] = -y[0]; };
    std::vector<double> bias_exact, bias_measured_ok;
    std::size_t stream = 87001;
    for (const std::size_t n : {25u, 50u, 100u}) {
        const double dt = 1.0 / double(n);
        const auto g = shared(make_grid(1.0, n, 0.0, 0.0, 0));
        const double scheme_mean = std::pow(1.0 - dt, double(n));
        bias_exact.push_back(exact - scheme_mean);

        const std::size_t n_paths = 200000;
        std::vector<double> ends(n_paths);
        for (std::size_t i = 0; i < n_paths; ++i) {
            RngStream rng(kDefaultSeed, stream++);
            const double x0 = 1.0;
            ends[i] = euler_maruyama(ou, nullptr,
                                     std::span<const double>(&x0, 1), g, rng)
                          .back();
        }
        const auto s = summarize(ends);
        // the sampler reproduces the scheme's own mean to Monte Carlo noise
        CHECK(std::abs(s.mean - scheme_mean) <= 3.0 * s.se);
    }
    // deterministic: bias strictly decreasing, halving dt halves it
    CHECK(bias_exact[0] > bias_exact[1]);
    CHECK(bias_exact[1] > bias_exact[2]);
    CHECK(bias_exact[2] > 0.0);
    CHECK(bias_exact[0] / bias_exact[1] == doctest::Approx(2.0).epsilon(0.05));
    CHECK(bias_exact[1] / bias_exact[2] == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("first_exit_time on hand-built paths") {
    PathRealization p;
    p.grid = shared(make_grid(1.0, 4, 0.0, 0.0, 0));
    p.dim = 1;

    p.values = {0.5, 0.0, 0.2, -0.1, 0.4}; // touch at t=0.25 is not an exit
    const auto hit = first_exit_time(p, kHalf);
    REQUIRE(hit.has_value());
    CHECK(*hit == 0.75);

    p.values = {0.5, 0.4, 0.2, 0.1, 0.4};
    CHECK(!first_exit_time(p, kHalf).has_value());

    const DomainSpec unit{Interval{0.0, 1.0}};
    p.values = {0.5, 0.9, 1.2, 0.4, 0.2};
    const auto top = first_exit_time(p, unit);
    REQUIRE(top.has_value());
    CHECK(*top == 0.5);
}

TEST_CASE("killed Brownian motion reproduces the half-line survival law" *
          doctest::timeout(1100)) {
    // gamma(1,1) against N=1e6 independent walks at dt=1e-4, the module's
    // primary cross-check of the analytic layer by brute force. Discrete
    // monitoring biases survival upward by O(sqrt(dt)), hence the one-sided
    // band [gamma - 3se, 1.01 gamma + 3se].
    const auto g = shared(make_grid(1.0, 10000, 0.0, 0.0, 0));
    const DriftField none = [](double, std::span<const double>,
                               std::span<double> out) { out[0] = 0.0; };
    const std::size_t n_paths = 1000000;
    std::size_t survived = 0;
    for (std::size_t i = 0; i < n_paths; ++i) {
        RngStream rng(kDefaultSeed, (88ULL << 32) + i);
        const double x0 = 1.0;
        const auto p = euler_maruyama(none, nullptr,
                                      std::span<const double>(&x0, 1), g, rng);
        survived += first_exit_time(p, kHalf).has_value() ? 0 : 1;
    }
    const double p_hat = double(survived) / double(n_paths);
    const double gamma = exit_prob(kHalf, 1.0, 1.0);
    const double se = std::sqrt(gamma * (1.0 - gamma) / double(n_paths));
    CHECK(p_hat >= gamma - 3.0 * se);
    CHECK(p_hat <= 1.01 * gamma + 3.0 * se);
}

TEST_CASE("RngStream basics") {
    RngStream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
    bool all_same_stream = true, all_same_seed = true;
    RngStream a2(42, 7);
    for (int i = 0; i < 64; ++i) {
        const auto v = a2.next_u64();
        all_same_stream = all_same_stream && (v == c.next_u64());
        all_same_seed = all_same_seed && (v == d.next_u64());
    }
    CHECK(!all_same_stream);
    CHECK(!all_same_seed);

    RngStream u(kDefaultSeed, 89001);
    for (int i = 0; i < 100000; ++i) {
        const double x = u.uniform();
        CHECK(x > 0.0);
        CHECK(x < 1.0);
    }

    RngStream gn(kDefaultSeed, 89002);
    double sum = 0.0, sum2 = 0.0;
    const std::size_t n = 1000000;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = gn.gaussian();
        CHECK(std::abs(x) < 9.0); // Box-Muller radius is capped by the 2^-54 floor
        sum += x;
        sum2 += x * x;
    }
    const double mean = sum / double(n);
    const double var = sum2 / double(n) - mean * mean;
    CHECK(std::abs(mean) <= 3.0 / std::sqrt(double(n)));
    CHECK(std::abs(var - 1.0) <= 3.0 * std::sqrt(2.0 / double(n)));
}
