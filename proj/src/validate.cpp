#include "condbm/validate.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "condbm/analytic.hpp"
#include "condbm/errors.hpp"
#include "condbm/flows.hpp"
#include "condbm/meander.hpp"
#include "condbm/parallel.hpp"
#include "condbm/stats.hpp"

namespace condbm {

namespace {

constexpr double kAlpha = 1e-3; // level shared by every statistical criterion

std::uint64_t base_stream(int id) { return static_cast<std::uint64_t>(id) << 48; }
constexpr std::uint64_t kSubEnsemble = 1ULL << 40;

double rayleigh_cdf(double z) { return z <= 0.0 ? 0.0 : -std::expm1(-0.5 * z * z); }

std::string fmtnum(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// Shared inputs. The 5e4-path meander ensemble serves criteria 4 and 7; it
// is built once on first use with a stream base pinned to criterion 4, so
// the draws do not depend on which suite ran first.
struct Ctx {
    ValidateOptions opt;
    std::shared_ptr<const TimeGrid> meander_grid =
        std::make_shared<TimeGrid>(make_grid_dt(1.0, 1e-3, 1e-4, 1e-6, 6));
    std::optional<MeanderEnsemble> sde50k;

    const MeanderEnsemble& sde_ensemble() {
        if (!sde50k)
            sde50k = sample_meander_ensemble("sde", 1.0, meander_grid, 50000, opt.seed,
                                             base_stream(4), opt.threads);
        return *sde50k;
    }
};

struct Outcome {
    double observed = 0.0;
    bool pass = false;
    std::string detail;
};

std::vector<double> endpoints(const MeanderEnsemble& ens) {
    std::vector<double> xs;
    xs.reserve(ens.paths.size());
    for (const auto& p : ens.paths) xs.push_back(p.back());
    return xs;
}

std::size_t index_at_time(const TimeGrid& g, double t) {
    auto it = std::lower_bound(g.t.begin(), g.t.end(), t);
    auto i = static_cast<std::size_t>(it - g.t.begin());
    if (i == g.t.size()) return i - 1;
    if (i > 0 && std::abs(g.t[i - 1] - t) < std::abs(g.t[i] - t)) --i;
    return i;
}

std::vector<double> values_at(const MeanderEnsemble& ens, double t) {
    std::vector<double> xs;
    xs.reserve(ens.paths.size());
    for (const auto& p : ens.paths) xs.push_back(p.value(index_at_time(*p.grid, t)));
    return xs;
}

// ---- 1: closed forms vs quadrature; Box vs product ----

Outcome c1_quadrature(Ctx&) {
    using quad = boost::math::quadrature::gauss_kronrod<double, 61>;
    const DomainSpec half{HalfLine{}};
    const DomainSpec interval{Interval{0.0, 1.0}};
    const DomainSpec box{Box{{HalfLine{}, Interval{0.0, 1.0}}}};

    double dev_quad = 0.0, dev_box = 0.0;
    for (int i = 0; i < 20; ++i) {
        const double t = 0.05 + (10.0 - 0.05) * i / 19.0;
        for (int j = 0; j < 20; ++j) {
            const double y = 0.05 + (6.0 - 0.05) * j / 19.0;
            const double q =
                std::sqrt(2.0 / (M_PI * t)) *
                quad::integrate([t](double u) { return std::exp(-0.5 * u * u / t); },
                                0.0, y, 15, 1e-13);
            dev_quad = std::max(dev_quad, std::abs(exit_prob(half, t, y) - q));

            const double y2 = (j + 0.5) / 20.0;
            const double v[2] = {y, y2};
            const double prod = exit_prob(half, t, y) * exit_prob(interval, t, y2);
            dev_box = std::max(
                dev_box,
                std::abs(exit_prob(box, t, std::span<const double>(v, 2)) - prod));
        }
    }
    Outcome out;
    out.observed = dev_quad;
    out.pass = dev_quad <= 1e-10 && dev_box <= 1e-14;
    out.detail = "max|halfline-quad|=" + fmtnum(dev_quad) +
                 " max|box-product|=" + fmtnum(dev_box);
    return out;
}

// ---- 2: 0 < drift <= 1/y, exact comparisons ----

Outcome c2_drift_bound(Ctx& ctx) {
    const DomainSpec half{HalfLine{}};
    RngStream rng(ctx.opt.seed, base_stream(2));
    std::size_t violations = 0;
    double worst = 0.0; // max of drift*y (must stay <= 1)
    for (int i = 0; i < 10000; ++i) {
        const double t = 10.0 * rng.uniform();
        const double y = 10.0 * rng.uniform();
        const double d = grad_log_exit_prob(half, t, y)[0];
        if (!(d > 0.0) || !(d <= 1.0 / y)) ++violations;
        worst = std::max(worst, d * y);
    }
    Outcome out;
    out.observed = worst;
    out.pass = violations == 0;
    out.detail = "violations=" + std::to_string(violations) +
                 " max(drift*y)=" + fmtnum(worst);
    return out;
}

// ---- 3: log-concavity along random interior segments ----

Outcome c3_log_concavity(Ctx& ctx) {
    RngStream rng(ctx.opt.seed, base_stream(3));
    double worst = -1.0;
    const auto second_diff = [&](const DomainSpec& dom, std::span<const double> a,
                                 std::span<const double> b) {
        std::vector<double> m(a.size());
        for (std::size_t j = 0; j < a.size(); ++j) m[j] = 0.5 * (a[j] + b[j]);
        const double t = 0.05 + 1.95 * rng.uniform();
        return std::log(exit_prob(dom, t, a)) + std::log(exit_prob(dom, t, b)) -
               2.0 * std::log(exit_prob(dom, t, m));
    };

    const DomainSpec half{HalfLine{}};
    for (int i = 0; i < 1000; ++i) {
        const double a = 0.02 + 3.0 * rng.uniform();
        const double b = a + 0.01 + 2.0 * rng.uniform();
        worst = std::max(worst, second_diff(half, std::span<const double>(&a, 1),
                                            std::span<const double>(&b, 1)));
    }
    const DomainSpec interval{Interval{0.0, 1.0}};
    for (int i = 0; i < 1000; ++i) {
        const double a = 0.01 + 0.8 * rng.uniform();
        const double b = a + (0.98 - a) * (0.05 + 0.95 * rng.uniform());
        worst = std::max(worst, second_diff(interval, std::span<const double>(&a, 1),
                                            std::span<const double>(&b, 1)));
    }
    const DomainSpec wedge{Wedge2{}};
    for (int i = 0; i < 1000;) {
        const double c = -1.0 + 2.0 * rng.uniform();
        const double g = 0.02 + 2.0 * rng.uniform();
        const double ang = 2.0 * M_PI * rng.uniform();
        const double len = 0.01 + rng.uniform();
        const double p0[2] = {c, c + g};
        const double p1[2] = {c + len * std::cos(ang), c + g + len * std::sin(ang)};
        if (!wedge.membership(std::span<const double>(p1, 2))) continue;
        worst = std::max(worst, second_diff(wedge, std::span<const double>(p0, 2),
                                            std::span<const double>(p1, 2)));
        ++i;
    }
    Outcome out;
    out.observed = worst;
    out.pass = worst <= 1e-8;
    out.detail = "max second difference=" + fmtnum(worst);
    return out;
}

// ---- 4: meander endpoint vs Rayleigh(1) ----

Outcome c4_meander_endpoint(Ctx& ctx) {
    const auto xs = endpoints(ctx.sde_ensemble());
    const auto ks = ks_one_sample(xs, rayleigh_cdf);
    Outcome out;
    out.observed = ks.p_value;
    out.pass = ks.p_value > kAlpha;
    out.detail = "D=" + fmtnum(ks.statistic) + " p=" + fmtnum(ks.p_value) +
                 " mean=" + fmtnum(summarize(xs).mean);
    return out;
}

// ---- 5: Imhof mean weight and weighted endpoint law ----

Outcome c5_imhof(Ctx& ctx) {
    auto grid = std::make_shared<TimeGrid>(make_grid(1.0, 16, 0.0, 0.0, 0));
    const auto ens = sample_meander_ensemble("bessel", 1.0, grid, 100000, ctx.opt.seed,
                                             base_stream(5), ctx.opt.threads);
    std::vector<double> ws;
    ws.reserve(ens.paths.size());
    for (const auto& p : ens.paths) ws.push_back(p.weight);
    const auto wsum = summarize(ws);
    const bool mean_ok = std::abs(wsum.mean - 1.0) <= 3.0 * wsum.se;

    const auto ks = ks_one_sample(endpoints(ens), rayleigh_cdf, ws);
    const bool ks_ok = ks.p_value > kAlpha;

    Outcome out;
    out.observed = wsum.mean;
    out.pass = mean_ok && ks_ok;
    out.detail = "mean weight=" + fmtnum(wsum.mean) + "+-" + fmtnum(wsum.se) +
                 " weighted KS p=" + fmtnum(ks.p_value) +
                 " n_eff=" + fmtnum(ks.n_eff);
    return out;
}

// ---- 6: pairwise sampler agreement at Y(1) and Y(1/2) ----

Outcome c6_sampler_agreement(Ctx& ctx) {
    const std::size_t n = 20000;
    const auto sde = sample_meander_ensemble("sde", 1.0, ctx.meander_grid, n,
                                             ctx.opt.seed, base_stream(6),
                                             ctx.opt.threads);
    const auto bes = sample_meander_ensemble("bessel", 1.0, ctx.meander_grid, n,
                                             ctx.opt.seed, base_stream(6) + kSubEnsemble,
                                             ctx.opt.threads);
    // The rejection oracle kills at grid times only, which acts like a
    // continuous barrier shifted by ~0.58*sqrt(dt); at dt=1e-3 that bias sits
    // right at the two-sample resolution for this N, so the kill grid is finer.
    auto grid_rej = std::make_shared<TimeGrid>(make_grid_dt(1.0, 5e-5, 1e-4, 1e-6, 6));
    const auto rej = sample_meander_ensemble(
        "rejection", 1.0, grid_rej, n, ctx.opt.seed,
        base_stream(6) + 2 * kSubEnsemble, ctx.opt.threads, 1e-3);

    std::vector<double> wb;
    wb.reserve(n);
    for (const auto& p : bes.paths) wb.push_back(p.weight);

    const double t_half = ctx.meander_grid->t[index_at_time(*ctx.meander_grid, 0.5)];
    double min_p = 1.0;
    std::ostringstream detail;
    detail << "t*=" << fmtnum(t_half);
    for (const double t : {1.0, t_half}) {
        const auto xs = values_at(sde, t);
        const auto xb = values_at(bes, t);
        const auto xr = values_at(rej, t);
        const double p1 = ks_two_sample(xs, xb, {}, wb).p_value;
        const double p2 = ks_two_sample(xs, xr).p_value;
        const double p3 = ks_two_sample(xb, xr, wb, {}).p_value;
        min_p = std::min({min_p, p1, p2, p3});
        detail << " t=" << fmtnum(t) << ":[sde-bes " << fmtnum(p1) << ", sde-rej "
               << fmtnum(p2) << ", bes-rej " << fmtnum(p3) << "]";
    }
    Outcome out;
    out.observed = min_p;
    out.pass = min_p > kAlpha;
    out.detail = detail.str() + " acc=" + fmtnum(rej.acceptance_rate);
    return out;
}

// ---- 7: Lemma 1 identity at t in {0.25, 0.5, 0.75} ----

Outcome c7_lemma1(Ctx& ctx) {
    const auto& ens = ctx.sde_ensemble();
    double worst_ratio = 0.0;
    bool pass = true;
    std::ostringstream detail;
    for (const double tt : {0.25, 0.5, 0.75}) {
        const double t = ctx.meander_grid->t[index_at_time(*ctx.meander_grid, tt)];
        const auto xs = values_at(ens, t);
        const auto s = summarize(xs);
        const double rhs = lemma1_rhs(1.0, t);
        const double allow = 3.0 * s.se + 0.01 * rhs;
        const double dev = std::abs(s.mean - rhs);
        pass = pass && dev <= allow;
        worst_ratio = std::max(worst_ratio, dev / allow);
        detail << " t=" << fmtnum(t) << ": mean=" << fmtnum(s.mean)
               << " rhs=" << fmtnum(rhs) << " dev/allow=" << fmtnum(dev / allow);
    }
    Outcome out;
    out.observed = worst_ratio;
    out.pass = pass;
    out.detail = detail.str();
    return out;
}

// ---- 8: boundary-pair gap law, SDE and oracle ----

Outcome c8_boundary(Ctx& ctx) {
    const std::size_t n_sde = 50000, n_orc = 20000;
    auto g = with_terminal(ctx.meander_grid, 1.0);
    std::vector<double> gap_sde(n_sde);
    parallel_for(n_sde, ctx.opt.threads, [&](std::size_t i) {
        RngStream rng(ctx.opt.seed, base_stream(8) + i);
        const auto pair = sample_boundary_sde(0.0, 1.0, g, rng);
        gap_sde[i] = pair.gap(pair.path.n_times() - 1);
    });
    std::vector<double> scaled(gap_sde);
    for (double& v : scaled) v /= std::sqrt(2.0);
    const auto ks1 = ks_one_sample(scaled, rayleigh_cdf);

    auto g0 = with_origin(g);
    std::vector<double> gap_orc(n_orc);
    parallel_for(n_orc, ctx.opt.threads, [&](std::size_t i) {
        RngStream rng(ctx.opt.seed, base_stream(8) + kSubEnsemble + i);
        const auto pair = sample_boundary_oracle(0.0, 1e-3, 1.0, g0, rng);
        gap_orc[i] = pair.gap(pair.path.n_times() - 1);
    });
    const std::span<const double> sde_head(gap_sde.data(), n_orc);
    const auto ks2 = ks_two_sample(sde_head, gap_orc);

    Outcome out;
    out.observed = std::min(ks1.p_value, ks2.p_value);
    out.pass = ks1.p_value > kAlpha && ks2.p_value > kAlpha;
    out.detail = "gap/sqrt2 vs Rayleigh p=" + fmtnum(ks1.p_value) +
                 " sde vs oracle p=" + fmtnum(ks2.p_value);
    return out;
}

// ---- 9: 2-particle non-meeting probability, dt-halving bias ----

Outcome c9_coalescence(Ctx& ctx) {
    const DomainSpec wedge{Wedge2{}};
    const double y0[2] = {0.0, 1.0};
    const double target = exit_prob(wedge, 1.0, std::span<const double>(y0, 2));

    const double dts[3] = {1e-3, 5e-4, 2.5e-4};
    const std::size_t n = 400000;
    double bias[3];
    for (int level = 0; level < 3; ++level) {
        std::atomic<std::size_t> apart{0};
        parallel_for(n, ctx.opt.threads, [&](std::size_t i) {
            RngStream rng(ctx.opt.seed,
                          base_stream(9) + static_cast<std::uint64_t>(level) * kSubEnsemble + i);
            const auto state = flow_final_state({0.0, 1.0}, 1.0, dts[level], rng);
            if (state.n_blocks == 2) apart.fetch_add(1, std::memory_order_relaxed);
        });
        bias[level] =
            static_cast<double>(apart.load()) / static_cast<double>(n) - target;
    }
    Outcome out;
    out.observed = bias[2];
    out.pass = bias[0] > bias[1] && bias[1] > bias[2] && bias[2] > 0.0 &&
               bias[2] < 0.01;
    out.detail = "bias=" + fmtnum(bias[0]) + "," + fmtnum(bias[1]) + "," +
                 fmtnum(bias[2]) + " target=" + fmtnum(target);
    return out;
}

// ---- 10: stationary point of the drifted flow ----

Outcome c10_stationary_point(Ctx& ctx) {
    const DriftSpec ou{[](double x) { return -x; }, 1.0, 1.0,
                       [](double x) { return -0.5 * x * x; }};
    const std::size_t n = 10000;
    std::vector<double> eta(n);
    std::vector<char> ok(n, 0);
    parallel_for(n, ctx.opt.threads, [&](std::size_t i) {
        RngStream rng(ctx.opt.seed, base_stream(10) + i);
        try {
            eta[i] = stationary_point_estimate(ou, 10.0, 5.0, 200, 1e-2, rng);
            ok[i] = 1;
        } catch (const NotCoalesced&) {
            ok[i] = 0;
        }
    });
    std::vector<double> xs;
    xs.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        if (ok[i]) xs.push_back(eta[i]);
    const double rate = static_cast<double>(xs.size()) / static_cast<double>(n);

    const auto ks = ks_one_sample(
        xs, [](double x) { return 0.5 * std::erfc(-x); }); // N(0, 1/2) CDF
    const auto s = summarize(xs);
    double var = 0.0;
    for (double x : xs) var += (x - s.mean) * (x - s.mean);
    var /= static_cast<double>(xs.size() - 1);

    Outcome out;
    out.observed = ks.p_value;
    out.pass = rate >= 0.99 && ks.p_value > kAlpha && std::abs(var - 0.5) <= 0.025;
    out.detail = "coalescence rate=" + fmtnum(rate) + " KS p=" + fmtnum(ks.p_value) +
                 " var=" + fmtnum(var);
    return out;
}

// ---- 11: infinite-cluster boundary gap vs truncated oracle ----

Outcome c11_infinite_cluster(Ctx& ctx) {
    const DriftSpec ou{[](double x) { return -x; }, 1.0, 1.0,
                       [](double x) { return -0.5 * x * x; }};
    (void)ou.law(); // build the theta table before the parallel section

    // The gap leaves a Bessel-type entrance but, under the expanding dual
    // drift, ends up large at t=1, so early-time integration error is not
    // forgotten; a relative-step bound of 1/32 keeps the entrance transient
    // resolved where a fixed dt would over-step it.
    const std::size_t n = 10000;
    auto grid_sde =
        std::make_shared<TimeGrid>(make_grid_graded(1.0, 1e-3, 1.5e-6, 1.0 / 32.0));
    std::vector<double> gap_sde(n);
    std::atomic<std::size_t> nonpos{0};
    parallel_for(n, ctx.opt.threads, [&](std::size_t i) {
        RngStream rng(ctx.opt.seed, base_stream(11) + i);
        const auto pair = sample_infinite_cluster_sde(ou, 0.0, 1.0, grid_sde, rng);
        const std::size_t m = pair.path.n_times();
        gap_sde[i] = pair.gap(m - 1);
        for (std::size_t k = 0; k < m; ++k)
            if (!(pair.gap(k) > 0.0)) {
                nonpos.fetch_add(1, std::memory_order_relaxed);
                break;
            }
    });

    // Oracle truncation horizon 5 = 5/lambda: {no meeting on [0,5], pair
    // straddles the vertex at t=5} is within noise of the infinite-horizon
    // event; the gap is read at t=1 to match the SDE run.
    auto grid_orc = std::make_shared<TimeGrid>(make_grid(5.0, 5000, 0.0, 0.0, 0));
    const std::size_t idx1 = index_at_time(*grid_orc, 1.0);
    std::vector<double> gap_orc(n);
    parallel_for(n, ctx.opt.threads, [&](std::size_t i) {
        RngStream rng(ctx.opt.seed, base_stream(11) + kSubEnsemble + i);
        const auto pair =
            sample_infinite_cluster_oracle(ou, 0.0, 1e-3, 5.0, grid_orc, rng);
        gap_orc[i] = pair.gap(idx1);
    });

    const auto ks = ks_two_sample(gap_sde, gap_orc);
    Outcome out;
    out.observed = ks.p_value;
    out.pass = ks.p_value > kAlpha && nonpos.load() == 0;
    out.detail = "KS p=" + fmtnum(ks.p_value) +
                 " nonpositive-gap paths=" + std::to_string(nonpos.load());
    return out;
}

// ---- 12: determinism and the semigroup property ----

Outcome c12_determinism(Ctx& ctx) {
    auto grid = std::make_shared<TimeGrid>(make_grid_dt(1.0, 1e-2, 1e-4, 1e-6, 4));
    const auto e1 = sample_meander_ensemble("sde", 1.0, grid, 64, ctx.opt.seed,
                                            base_stream(12), ctx.opt.threads);
    const auto e2 = sample_meander_ensemble("sde", 1.0, grid, 64, ctx.opt.seed,
                                            base_stream(12), ctx.opt.threads);
    bool identical = e1.paths.size() == e2.paths.size();
    for (std::size_t i = 0; identical && i < e1.paths.size(); ++i)
        identical = e1.paths[i].values == e2.paths[i].values &&
                    e1.paths[i].grid->t == e2.paths[i].grid->t &&
                    e1.paths[i].weight == e2.paths[i].weight;

    const std::vector<double> pts{-1.0, -0.5, 0.0, 0.5, 1.0};
    RngStream r1(ctx.opt.seed, base_stream(12) + kSubEnsemble);
    RngStream r2(ctx.opt.seed, base_stream(12) + kSubEnsemble);
    const auto full = simulate_coalescing(pts, 1.0, 0.01, r1);
    auto half = simulate_coalescing(pts, 0.5, 0.01, r2);
    continue_coalescing(half, 0.5, r2);
    const bool semigroup = full.grid->t == half.grid->t &&
                           full.positions == half.positions &&
                           full.survivor == half.survivor;

    Outcome out;
    out.observed = identical && semigroup ? 1.0 : 0.0;
    out.pass = identical && semigroup;
    out.detail = std::string("re-run identical=") + (identical ? "yes" : "no") +
                 " composed==single=" + (semigroup ? "yes" : "no");
    return out;
}

struct Meta {
    int id;
    const char* suite;
    const char* name;
    const char* target;
    const char* tolerance;
    Outcome (*fn)(Ctx&);
};

const Meta kCriteria[] = {
    {1, "analytic", "halfline-quadrature", "exit_prob equals adaptive quadrature; Box equals product",
     "1e-10 absolute (box 1e-14)", c1_quadrature},
    {2, "analytic", "drift-bound", "0 < d/dy log gamma <= 1/y on 10^4 random (t,y)",
     "exact inequality", c2_drift_bound},
    {3, "analytic", "log-concavity", "second differences of log gamma along segments",
     "<= 1e-8", c3_log_concavity},
    {4, "meander", "meander-endpoint", "SDE endpoint law = Rayleigh(1)",
     "KS p > 0.001 at N=5e4", c4_meander_endpoint},
    {5, "meander", "imhof-weights", "mean Bessel weight = 1; weighted endpoint = Rayleigh(1)",
     "3 SE; weighted KS p > 0.001 at N=1e5", c5_imhof},
    {6, "meander", "sampler-agreement", "sde/bessel/rejection agree at Y(1), Y(1/2)",
     "all pairwise KS p > 0.001 at N=2e4", c6_sampler_agreement},
    {7, "meander", "lemma1-identity", "E[Y(t)] = lemma1_rhs(1,t), t in {0.25,0.5,0.75}",
     "3 SE + 1%", c7_lemma1},
    {8, "flows", "boundary-law", "gap/sqrt(2) = Rayleigh(1); SDE gap = oracle gap",
     "KS p > 0.001 (N=5e4; N=2e4)", c8_boundary},
    {9, "flows", "coalescence-prob", "non-meeting prob -> gamma_Wedge2(1,(0,1))",
     "monotone bias, final < 1%", c9_coalescence},
    {10, "flows", "stationary-point", "eta_0 law = N(0,1/2) for a(x) = -x",
     ">=99% coalesce; KS p > 0.001; var within 5%", c10_stationary_point},
    {11, "flows", "infinite-cluster", "SDE gap at t=1 = truncated-oracle gap",
     "KS p > 0.001 at N=1e4; gaps all positive", c11_infinite_cluster},
    {12, "determinism", "determinism", "re-runs byte-identical; composed = single-shot flow",
     "exact", c12_determinism},
};

} // namespace

std::vector<CriterionResult> run_acceptance(const ValidateOptions& options,
                                            std::ostream& log) {
    const std::string& suite = options.suite;
    if (suite != "all" && suite != "analytic" && suite != "meander" &&
        suite != "flows" && suite != "determinism")
        throw std::invalid_argument("validate: unknown suite '" + suite + "'");

    Ctx ctx;
    ctx.opt = options;
    std::vector<CriterionResult> results;
    for (const auto& meta : kCriteria) {
        if (suite != "all" && suite != meta.suite) continue;
        CriterionResult r;
        r.id = meta.id;
        r.name = meta.name;
        r.target = meta.target;
        r.tolerance = meta.tolerance;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const Outcome o = meta.fn(ctx);
            r.observed = o.observed;
            r.pass = o.pass;
            r.detail = o.detail;
        } catch (const std::exception& e) {
            r.pass = false;
            r.detail = std::string("exception: ") + e.what();
        }
        r.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        char line[512];
        std::snprintf(line, sizeof line, "%s %2d %-20s %s [%.1fs]",
                      r.pass ? "PASS" : "FAIL", r.id, r.name.c_str(),
                      r.detail.c_str(), r.seconds);
        log << line << std::endl;
        results.push_back(std::move(r));
    }
    return results;
}

nlohmann::json acceptance_report_json(const std::vector<CriterionResult>& results) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : results) {
        arr.push_back({{"id", r.id},
                       {"name", r.name},
                       {"target", r.target},
                       {"observed", r.observed},
                       {"tolerance", r.tolerance},
                       {"verdict", r.pass ? "PASS" : "FAIL"},
                       {"seconds", r.seconds},
                       {"detail", r.detail}});
    }
    return arr;
}

int acceptance_exit_code(const std::vector<CriterionResult>& results) {
    int failures = 0;
    for (const auto& r : results)
        if (!r.pass) ++failures;
    if (failures == 0) return 0;
    return std::min(125, 3 + failures);
}

} // namespace condbm
