// condbm: samplers, flow simulators and analytic evaluators for Brownian
// motion conditioned to stay in an open set, plus the validation suite.
//
// Exit codes: 0 success, 2 usage error, 3 simulation failure,
// 4-125 validation failures (3 + count, capped).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "condbm/analytic.hpp"
#include "condbm/domain.hpp"
#include "condbm/drift_expr.hpp"
#include "condbm/errors.hpp"
#include "condbm/flows.hpp"
#include "condbm/grid.hpp"
#include "condbm/io.hpp"
#include "condbm/meander.hpp"
#include "condbm/parallel.hpp"
#include "condbm/rng.hpp"
#include "condbm/stats.hpp"
#include "condbm/validate.hpp"

namespace {

using namespace condbm;
using nlohmann::json;

struct GlobalOpts {
    std::uint64_t seed = kDefaultSeed;
    std::string out;
    std::string format = "csv";
    unsigned threads = 0;
};

struct GridOpts {
    double dt = 1e-3;
    double eps0 = 1e-4;
    double eps1 = 1e-6;
    int levels = 6;
};

void add_grid_options(CLI::App* sub, GridOpts& g) {
    sub->add_option("--dt", g.dt, "target uniform step (default 1e-3)");
    sub->add_option("--eps0", g.eps0, "entrance cut epsilon_0 (default 1e-4)");
    sub->add_option("--eps1", g.eps1, "terminal cut epsilon_1 (default 1e-6)");
    sub->add_option("--levels", g.levels, "endpoint refinement levels (default 6)");
}

// Output sink: --out file when given, stdout otherwise.
class OutStream {
public:
    explicit OutStream(const std::string& path) {
        if (!path.empty()) {
            file_.open(path, std::ios::binary);
            if (!file_)
                throw std::invalid_argument("cannot open output file: " + path);
            os_ = &file_;
        }
    }
    std::ostream& get() { return *os_; }

private:
    std::ofstream file_;
    std::ostream* os_ = &std::cout;
};

json envelope(json config, json results) {
    return json{{"version", kVersion},
                {"config", std::move(config)},
                {"results", std::move(results)}};
}

json summary_json(std::span<const double> xs) {
    const auto s = summarize(xs);
    return json{{"n", s.n}, {"mean", s.mean}, {"se", s.se},
                {"min", s.min}, {"max", s.max}};
}

void emit_json(const GlobalOpts& g, json config, json results) {
    OutStream out(g.out);
    out.get() << envelope(std::move(config), std::move(results)).dump(2) << "\n";
}

// ---- gamma ----

struct GammaOpts {
    std::string domain = "halfline";
    double t = 1.0;
    std::vector<double> y;
    double lo = 0.0, hi = 1.0;                 // interval
    std::vector<double> anchor, normal;        // halfspace
    std::string factors = "halfline,halfline"; // box
};

DomainSpec build_domain(const GammaOpts& o) {
    if (o.domain == "halfline") return DomainSpec{HalfLine{}};
    if (o.domain == "interval") return DomainSpec{Interval{o.lo, o.hi}};
    if (o.domain == "wedge2") return DomainSpec{Wedge2{}};
    if (o.domain == "halfspace") {
        if (o.anchor.empty() || o.anchor.size() != o.normal.size())
            throw std::invalid_argument(
                "halfspace needs --anchor and --normal of equal dimension");
        return DomainSpec{HalfSpace{o.anchor, o.normal}};
    }
    if (o.domain == "box") {
        Box box;
        std::stringstream ss(o.factors);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (item == "halfline") {
                box.factors.push_back(HalfLine{});
            } else if (item.rfind("interval:", 0) == 0) {
                double a, b;
                char colon;
                std::stringstream vs(item.substr(9));
                if (!(vs >> a >> colon >> b) || colon != ':')
                    throw std::invalid_argument("bad box factor '" + item +
                                                "' (want interval:LO:HI)");
                box.factors.push_back(Interval{a, b});
            } else {
                throw std::invalid_argument("bad box factor '" + item + "'");
            }
        }
        return DomainSpec{std::move(box)};
    }
    throw std::invalid_argument("unknown domain '" + o.domain + "'");
}

int run_gamma(const GlobalOpts& g, const GammaOpts& o) {
    const DomainSpec dom = build_domain(o);
    const std::span<const double> y(o.y);
    const double gamma = exit_prob(dom, o.t, y);
    const auto grad = grad_log_exit_prob(dom, o.t, y);

    if (g.format == "json") {
        emit_json(g,
                  json{{"command", "gamma"}, {"seed", g.seed}, {"domain", o.domain},
                       {"t", o.t}, {"y", o.y}},
                  json{{"gamma", gamma}, {"grad_log_gamma", grad}});
    } else {
        OutStream out(g.out);
        out.get() << "gamma = " << fmt17(gamma) << "\n";
        out.get() << "grad_log_gamma =";
        for (const double d : grad) out.get() << " " << fmt17(d);
        out.get() << "\n";
    }
    return 0;
}

// ---- meander ----

struct MeanderOpts {
    std::string method = "sde";
    double T = 1.0;
    std::size_t n = 1000;
    double y0 = 0.0;
    std::size_t max_attempts = 1000000;
    GridOpts grid;
};

int run_meander(const GlobalOpts& g, const MeanderOpts& o) {
    auto grid = std::make_shared<TimeGrid>(
        make_grid_dt(o.T, o.grid.dt, o.grid.eps0, o.grid.eps1, o.grid.levels));
    const auto ens = sample_meander_ensemble(o.method, o.T, grid, o.n, g.seed, 0,
                                             g.threads, o.y0, o.max_attempts);

    if (g.format == "json") {
        std::vector<double> ends, ws;
        ends.reserve(o.n);
        ws.reserve(o.n);
        for (const auto& p : ens.paths) {
            ends.push_back(p.back());
            ws.push_back(p.weight);
        }
        json results{{"sampler", ens.sampler},
                     {"n", ens.paths.size()},
                     {"horizon", ens.horizon},
                     {"endpoint", summary_json(ends)},
                     {"weight", summary_json(ws)}};
        if (o.method == "rejection") {
            results["y0"] = ens.y0;
            results["acceptance_rate"] = ens.acceptance_rate;
        }
        emit_json(g,
                  json{{"command", "meander"}, {"seed", g.seed}, {"method", o.method},
                       {"T", o.T}, {"n", o.n}, {"y0", o.y0}, {"dt", o.grid.dt},
                       {"eps0", o.grid.eps0}, {"eps1", o.grid.eps1},
                       {"levels", o.grid.levels}},
                  std::move(results));
    } else {
        OutStream out(g.out);
        out.get() << kPathCsvHeader << "\n";
        for (std::size_t i = 0; i < ens.paths.size(); ++i)
            write_path_rows(out.get(), ens.paths[i], i);
    }
    return 0;
}

// ---- cluster (boundary pairs) ----

struct ClusterOpts {
    std::string mode = "sde";
    double x = 0.0;
    double T = 1.0;
    std::size_t n = 1000;
    double epsilon = 1e-3;
    std::size_t max_attempts = 1000000;
    GridOpts grid;
};

int run_cluster(const GlobalOpts& g, const ClusterOpts& o) {
    auto base = std::make_shared<TimeGrid>(
        make_grid_dt(o.T, o.grid.dt, o.grid.eps0, o.grid.eps1, o.grid.levels));
    std::vector<BoundaryPair> pairs(o.n);
    if (o.mode == "sde") {
        auto grid = with_terminal(base, o.T);
        parallel_for(o.n, g.threads, [&](std::size_t i) {
            RngStream rng(g.seed, i);
            pairs[i] = sample_boundary_sde(o.x, o.T, grid, rng);
        });
    } else if (o.mode == "oracle") {
        auto grid = with_origin(with_terminal(base, o.T));
        parallel_for(o.n, g.threads, [&](std::size_t i) {
            RngStream rng(g.seed, i);
            pairs[i] =
                sample_boundary_oracle(o.x, o.epsilon, o.T, grid, rng, o.max_attempts);
        });
    } else {
        throw std::invalid_argument("cluster: unknown mode '" + o.mode + "'");
    }

    if (g.format == "json") {
        std::vector<double> gaps, centers;
        gaps.reserve(o.n);
        centers.reserve(o.n);
        std::size_t attempts = 0;
        for (const auto& p : pairs) {
            const std::size_t last = p.path.n_times() - 1;
            gaps.push_back(p.gap(last));
            centers.push_back(0.5 * (p.alpha(last) + p.beta(last)));
            attempts += p.path.retries;
        }
        json results{{"mode", o.mode},
                     {"n", o.n},
                     {"horizon", o.T},
                     {"x", o.x},
                     {"gap", summary_json(gaps)},
                     {"center", summary_json(centers)}};
        if (o.mode == "oracle")
            results["acceptance_rate"] =
                static_cast<double>(o.n) / static_cast<double>(attempts);
        emit_json(g,
                  json{{"command", "cluster"}, {"seed", g.seed}, {"mode", o.mode},
                       {"x", o.x}, {"T", o.T}, {"n", o.n}, {"epsilon", o.epsilon},
                       {"dt", o.grid.dt}, {"eps0", o.grid.eps0},
                       {"eps1", o.grid.eps1}, {"levels", o.grid.levels}},
                  std::move(results));
    } else {
        OutStream out(g.out);
        out.get() << kPairCsvHeader << "\n";
        for (std::size_t i = 0; i < pairs.size(); ++i)
            write_pair_rows(out.get(), pairs[i], i);
    }
    return 0;
}

// ---- flow ----

struct FlowOpts {
    std::string points = "-5:5:0.1";
    double T = 1.0;
    double dt = 1e-2;
    double census_a = std::numeric_limits<double>::quiet_NaN();
    double census_b = std::numeric_limits<double>::quiet_NaN();
};

std::vector<double> parse_points(const std::string& text) {
    std::vector<double> pts;
    if (text.find(':') != std::string::npos) {
        double lo, hi, step;
        char c1, c2;
        std::stringstream ss(text);
        if (!(ss >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' ||
            !(step > 0))
            throw std::invalid_argument("bad --points range '" + text +
                                        "' (want LO:HI:STEP)");
        for (int k = 0;; ++k) {
            const double x = lo + step * k;
            if (x > hi + 0.5 * step) break;
            pts.push_back(x);
        }
    } else {
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ','))
            pts.push_back(std::stod(item));
    }
    return pts;
}

int run_flow(const GlobalOpts& g, const FlowOpts& o) {
    const auto pts = parse_points(o.points);
    RngStream rng(g.seed, 0);
    const auto sys = simulate_coalescing(pts, o.T, o.dt, rng);

    if (g.format == "json") {
        const auto snap = cluster_partition(sys);
        const double a = std::isnan(o.census_a) ? pts.front() : o.census_a;
        const double b = std::isnan(o.census_b) ? pts.back() : o.census_b;
        std::vector<std::size_t> sizes;
        sizes.reserve(snap.members.size());
        for (const auto& [first, last] : snap.members)
            sizes.push_back(last - first + 1);
        emit_json(g,
                  json{{"command", "flow"}, {"seed", g.seed}, {"points", o.points},
                       {"T", o.T}, {"dt", o.dt}},
                  json{{"n_particles", sys.n()},
                       {"horizon", sys.grid->back()},
                       {"n_clusters", snap.vertices.size()},
                       {"vertices", snap.vertices},
                       {"cluster_sizes", sizes},
                       {"census", json{{"a", a}, {"b", b},
                                       {"count", cluster_count(snap, sys, a, b)}}}});
    } else {
        OutStream out(g.out);
        out.get() << kSystemCsvHeader << "\n";
        write_system_rows(out.get(), sys);
    }
    return 0;
}

// ---- drifted ----

struct DriftedOpts {
    std::string a_text = "-x";
    double lipschitz = 0.0; // <= 0: estimate from the expression
    double lambda = 0.0;    // <= 0: estimate from the expression
    double fit_range = 10.0;
    std::string mode = "stationary";
    // stationary
    double lookback = 10.0;
    double span = 5.0;
    std::size_t runs = 1000;
    std::size_t particles = 200;
    double dt = 1e-2;
    // infinite-cluster pair
    double x = 0.0;
    double T = 1.0;
    std::size_t n = 1000;
    GridOpts grid;
};

int run_drifted(const GlobalOpts& g, const DriftedOpts& o) {
    const DriftExpr expr = DriftExpr::parse(o.a_text);
    auto fn = expr.as_function();
    double L = o.lipschitz, lam = o.lambda;
    if (L <= 0.0 || lam <= 0.0) {
        const auto est = estimate_drift_constants(fn, -o.fit_range, o.fit_range);
        if (L <= 0.0) L = est.lipschitz;
        if (lam <= 0.0) lam = est.lambda;
    }
    if (!(lam > 0.0))
        throw std::invalid_argument(
            "drift '" + o.a_text +
            "' is not strictly decreasing on the fitted range (lambda <= 0); "
            "pass --lambda explicitly if the range is the problem");
    const DriftSpec drift(fn, L, lam);

    if (o.mode == "stationary") {
        std::vector<double> eta(o.runs);
        std::vector<char> ok(o.runs, 0);
        parallel_for(o.runs, g.threads, [&](std::size_t i) {
            RngStream rng(g.seed, i);
            try {
                eta[i] = stationary_point_estimate(drift, o.lookback, o.span,
                                                   o.particles, o.dt, rng);
                ok[i] = 1;
            } catch (const NotCoalesced&) {
                ok[i] = 0;
            }
        });
        std::vector<double> xs;
        std::vector<std::size_t> ids;
        for (std::size_t i = 0; i < o.runs; ++i)
            if (ok[i]) {
                xs.push_back(eta[i]);
                ids.push_back(i);
            }
        if (xs.empty())
            throw NotCoalesced(o.particles); // every run kept >1 survivor

        if (g.format == "json") {
            const auto s = summarize(xs);
            double var = 0.0;
            for (const double x : xs) var += (x - s.mean) * (x - s.mean);
            var /= static_cast<double>(std::max<std::size_t>(xs.size() - 1, 1));
            emit_json(
                g,
                json{{"command", "drifted"}, {"seed", g.seed}, {"mode", o.mode},
                     {"a", o.a_text}, {"lookback", o.lookback}, {"span", o.span},
                     {"runs", o.runs}, {"particles", o.particles}, {"dt", o.dt}},
                json{{"lambda", lam}, {"lipschitz", L},
                     {"coalesced", xs.size()}, {"failed", o.runs - xs.size()},
                     {"rate", static_cast<double>(xs.size()) /
                                  static_cast<double>(o.runs)},
                     {"eta0", summary_json(xs)}, {"variance", var}});
        } else {
            OutStream out(g.out);
            out.get() << "run_id,eta0\n";
            for (std::size_t k = 0; k < xs.size(); ++k)
                out.get() << ids[k] << "," << fmt17(xs[k]) << "\n";
        }
        return 0;
    }

    if (o.mode != "infinite")
        throw std::invalid_argument("drifted: unknown mode '" + o.mode + "'");

    // Conditioned infinite-cluster boundary pair. The gap grows under the
    // expanding dual drift, so entrance-region integration error persists to
    // the horizon; a graded grid (relative step <= 1/32 until it reaches dt)
    // resolves the transient. The entrance time matches the refined front
    // the other subcommands use, eps0 / 2^levels.
    auto grid = std::make_shared<TimeGrid>(make_grid_graded(
        o.T, o.grid.dt, o.grid.eps0 * std::ldexp(1.0, -o.grid.levels), 1.0 / 32.0));
    (void)drift.law(); // build the stationary table before the parallel loop
    std::vector<BoundaryPair> pairs(o.n);
    parallel_for(o.n, g.threads, [&](std::size_t i) {
        RngStream rng(g.seed, i);
        pairs[i] = sample_infinite_cluster_sde(drift, o.x, o.T, grid, rng);
    });

    if (g.format == "json") {
        std::vector<double> gaps;
        gaps.reserve(o.n);
        for (const auto& p : pairs) gaps.push_back(p.gap(p.path.n_times() - 1));
        emit_json(g,
                  json{{"command", "drifted"}, {"seed", g.seed}, {"mode", o.mode},
                       {"a", o.a_text}, {"x", o.x}, {"T", o.T}, {"n", o.n},
                       {"dt", o.grid.dt}, {"eps0", o.grid.eps0},
                       {"levels", o.grid.levels}},
                  json{{"lambda", lam}, {"lipschitz", L},
                       {"gap", summary_json(gaps)}});
    } else {
        OutStream out(g.out);
        out.get() << kPairCsvHeader << "\n";
        for (std::size_t i = 0; i < pairs.size(); ++i)
            write_pair_rows(out.get(), pairs[i], i);
    }
    return 0;
}

// ---- validate ----

int run_validate(const GlobalOpts& g, const std::string& suite) {
    ValidateOptions vo;
    vo.seed = g.seed;
    vo.threads = g.threads;
    vo.suite = suite;

    // Keep stdout pure JSON when the report itself goes there.
    const bool json_to_stdout = g.format == "json" && g.out.empty();
    std::ostream& log = json_to_stdout ? std::cerr : std::cout;
    const auto results = run_acceptance(vo, log);

    if (g.format == "json" || !g.out.empty())
        emit_json(g,
                  json{{"command", "validate"}, {"seed", g.seed}, {"suite", suite},
                       {"threads", g.threads}},
                  acceptance_report_json(results));
    return acceptance_exit_code(results);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Brownian motion conditioned to stay in an open set: samplers, "
                 "coalescing flows, and the validation suite"};
    app.set_config("--config", "", "key=value configuration file");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--seed", g.seed, "RNG seed (env CONDBM_SEED)")
        ->envname("CONDBM_SEED");
    app.add_option("--out", g.out, "output file (default stdout)");
    app.add_option("--format", g.format, "output format")
        ->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--threads", g.threads,
                   "worker threads, 0 = hardware (results independent of it)");

    GammaOpts ga;
    auto* gamma = app.add_subcommand("gamma", "evaluate gamma_G and grad log gamma_G");
    gamma->fallthrough();
    gamma->add_option("--domain", ga.domain, "domain shape")
        ->check(CLI::IsMember({"halfline", "interval", "wedge2", "halfspace", "box"}));
    gamma->add_option("--t", ga.t, "time")->required();
    gamma->add_option("--y", ga.y, "point, comma-separated for dim > 1")
        ->required()
        ->delimiter(',');
    gamma->add_option("--lo", ga.lo, "interval left endpoint (default 0)");
    gamma->add_option("--hi", ga.hi, "interval right endpoint (default 1)");
    gamma->add_option("--anchor", ga.anchor, "halfspace anchor")->delimiter(',');
    gamma->add_option("--normal", ga.normal, "halfspace inward normal")->delimiter(',');
    gamma->add_option("--factors", ga.factors,
                      "box factors, e.g. halfline,interval:0:1");

    MeanderOpts mo;
    auto* meander = app.add_subcommand("meander", "sample conditioned-BM ensembles");
    meander->fallthrough();
    meander->add_option("--method", mo.method, "sampler")
        ->check(CLI::IsMember({"sde", "bessel", "rejection"}));
    meander->add_option("--T", mo.T, "horizon");
    meander->add_option("--n", mo.n, "ensemble size");
    meander->add_option("--y0", mo.y0, "rejection start point (0: default scale)");
    meander->add_option("--max-attempts", mo.max_attempts,
                        "rejection attempt budget per path");
    add_grid_options(meander, mo.grid);

    ClusterOpts co;
    auto* cluster = app.add_subcommand("cluster", "cluster-boundary pair ensembles");
    cluster->fallthrough();
    cluster->add_option("--mode", co.mode, "sde | oracle")
        ->check(CLI::IsMember({"sde", "oracle"}));
    cluster->add_option("--x", co.x, "cluster vertex");
    cluster->add_option("--T", co.T, "horizon");
    cluster->add_option("--n", co.n, "ensemble size");
    cluster->add_option("--epsilon", co.epsilon, "oracle pair separation");
    cluster->add_option("--max-attempts", co.max_attempts,
                        "oracle attempt budget per path");
    add_grid_options(cluster, co.grid);

    FlowOpts fo;
    auto* flow = app.add_subcommand("flow", "coalescing n-point motion with census");
    flow->fallthrough();
    flow->add_option("--points", fo.points, "LO:HI:STEP range or comma list");
    flow->add_option("--T", fo.T, "horizon");
    flow->add_option("--dt", fo.dt, "step size");
    flow->add_option("--a", fo.census_a, "census window left end (default min point)");
    flow->add_option("--b", fo.census_b, "census window right end (default max point)");

    DriftedOpts dr;
    auto* drifted =
        app.add_subcommand("drifted", "drifted-flow stationary point / infinite cluster");
    drifted->fallthrough();
    drifted->add_option("--a", dr.a_text,
                        "drift expression in x (+,-,*,/,exp,tanh)")
        ->required();
    drifted->add_option("--mode", dr.mode, "stationary | infinite")
        ->check(CLI::IsMember({"stationary", "infinite"}));
    drifted->add_option("--lipschitz", dr.lipschitz, "Lipschitz constant (0: estimate)");
    drifted->add_option("--lambda", dr.lambda, "monotonicity constant (0: estimate)");
    drifted->add_option("--fit-range", dr.fit_range,
                        "estimation range [-R, R] for the constants");
    drifted->add_option("--lookback", dr.lookback, "backward-flow duration");
    drifted->add_option("--span", dr.span, "particle span [-span, span]");
    drifted->add_option("--runs", dr.runs, "stationary-point repetitions");
    drifted->add_option("--particles", dr.particles, "particles per run");
    drifted->add_option("--dt", dr.dt, "flow step size");
    drifted->add_option("--x", dr.x, "infinite-cluster vertex");
    drifted->add_option("--T", dr.T, "infinite-cluster horizon");
    drifted->add_option("--n", dr.n, "infinite-cluster ensemble size");
    drifted->add_option("--pair-dt", dr.grid.dt, "pair SDE step");
    drifted->add_option("--pair-eps0", dr.grid.eps0, "pair SDE entrance cut");
    drifted->add_option("--pair-levels", dr.grid.levels, "pair SDE refinement levels");

    std::string suite = "all";
    auto* validate = app.add_subcommand("validate", "run the acceptance suite");
    validate->fallthrough();
    validate->add_option("--suite", suite,
                         "all | analytic | meander | flows | determinism")
        ->check(CLI::IsMember({"all", "analytic", "meander", "flows", "determinism"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gamma->parsed()) return run_gamma(g, ga);
        if (meander->parsed()) return run_meander(g, mo);
        if (cluster->parsed()) return run_cluster(g, co);
        if (flow->parsed()) return run_flow(g, fo);
        if (drifted->parsed()) return run_drifted(g, dr);
        if (validate->parsed()) return run_validate(g, suite);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const SimulationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
