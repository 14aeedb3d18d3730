#include "condbm/flows.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "condbm/errors.hpp"
#include "condbm/meander.hpp"

namespace condbm {

namespace {

[[noreturn]] void bad(const char* op, const char* what) {
    throw std::invalid_argument(std::string(op) + ": " + what);
}

// A maximal coalesced group: position plus the contiguous initial-index
// range it carries. The live list is kept sorted by construction.
struct Block {
    double pos;
    std::uint32_t first;
    std::uint32_t last;
};

// One flow step: every live block draws (in ascending order — this is the
// stream-continuation contract), then the sweep merges order violations to
// the midpoint of the crossed values, cascading leftward.
void flow_step(std::vector<Block>& blocks, double dt, RngStream& rng,
               const std::function<double(double)>* a) {
    const double sdt = std::sqrt(dt);
    for (auto& blk : blocks) {
        const double b = a ? (*a)(blk.pos) : 0.0;
        blk.pos += b * dt + sdt * rng.gaussian();
    }
    std::size_t w = 0;
    for (std::size_t r = 0; r < blocks.size(); ++r) {
        Block cur = blocks[r];
        while (w > 0 && blocks[w - 1].pos >= cur.pos) {
            cur.pos = 0.5 * (blocks[w - 1].pos + cur.pos);
            cur.first = blocks[w - 1].first;
            --w;
        }
        blocks[w++] = cur;
    }
    blocks.resize(w);
}

void record_row(const std::vector<Block>& blocks, std::vector<double>& positions,
                std::vector<std::uint32_t>& survivor) {
    for (const auto& blk : blocks) {
        for (std::uint32_t i = blk.first; i <= blk.last; ++i) {
            positions.push_back(blk.pos);
            survivor.push_back(blk.first);
        }
    }
    // positions/survivor grew by exactly n: blocks partition 0..n-1
}

std::vector<Block> initial_blocks(const std::vector<double>& points, const char* op) {
    if (points.empty()) bad(op, "need at least one particle");
    for (std::size_t i = 1; i < points.size(); ++i)
        if (!(points[i] > points[i - 1])) bad(op, "points must be strictly increasing");
    std::vector<Block> blocks(points.size());
    for (std::size_t i = 0; i < points.size(); ++i)
        blocks[i] = {points[i], static_cast<std::uint32_t>(i),
                     static_cast<std::uint32_t>(i)};
    return blocks;
}

std::size_t step_count(double horizon, double dt, const char* op) {
    if (!(dt > 0.0) || !(dt <= horizon)) bad(op, "need 0 < dt <= horizon");
    return static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
}

// Flow grids are built as t_k = h*k for every k (the realized horizon h*steps
// may differ from the request in the last ulp). Continuation appends
// h*(m+k) to the same construction, so composed runs reproduce a single
// longer run bitwise.
std::shared_ptr<TimeGrid> make_flow_grid(double h, std::size_t steps) {
    auto g = std::make_shared<TimeGrid>();
    g->t.reserve(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k)
        g->t.push_back(h * static_cast<double>(k));
    g->horizon = g->t.back();
    g->dt_max = h;
    return g;
}

} // namespace

ParticleSystem simulate_coalescing(std::vector<double> points, double horizon,
                                   double dt, RngStream& rng,
                                   const DriftSpec* drift) {
    auto blocks = initial_blocks(points, "simulate_coalescing");
    const std::size_t steps = step_count(horizon, dt, "simulate_coalescing");
    auto grid = make_flow_grid(horizon / static_cast<double>(steps), steps);

    ParticleSystem sys;
    sys.initial = std::move(points);
    sys.grid = grid;
    if (drift) sys.drift = *drift;
    const std::size_t n = sys.initial.size();
    sys.positions.reserve(grid->n_times() * n);
    sys.survivor.reserve(grid->n_times() * n);

    record_row(blocks, sys.positions, sys.survivor);
    const auto* a = drift ? &drift->a : nullptr;
    for (std::size_t k = 1; k < grid->n_times(); ++k) {
        flow_step(blocks, grid->t[k] - grid->t[k - 1], rng, a);
        record_row(blocks, sys.positions, sys.survivor);
    }
    return sys;
}

void continue_coalescing(ParticleSystem& system, double extra_horizon, RngStream& rng) {
    if (!system.grid || system.n_times() == 0)
        bad("continue_coalescing", "system not simulated");
    const double h = system.grid->dt_max;
    const std::size_t steps = step_count(extra_horizon, h, "continue_coalescing");
    const std::size_t n = system.n();
    const std::size_t last = system.n_times() - 1;

    // rebuild the live block list from the last recorded row
    std::vector<Block> blocks;
    for (std::size_t i = 0; i < n;) {
        const std::uint32_t rep = system.rep(last, i);
        std::size_t j = i;
        while (j + 1 < n && system.rep(last, j + 1) == rep) ++j;
        blocks.push_back({system.pos(last, i), rep, static_cast<std::uint32_t>(j)});
        i = j + 1;
    }

    // New times continue the h*k construction bitwise, and the steps below
    // consume grid-time differences exactly as the original run did:
    // composing runs is then identical to one longer run, not merely close
    // in the last ulp.
    auto grid = std::make_shared<TimeGrid>(*system.grid);
    for (std::size_t k = 1; k <= steps; ++k)
        grid->t.push_back(h * static_cast<double>(last + k));
    grid->horizon = grid->t.back();

    for (std::size_t k = 0; k < steps; ++k) {
        const double dt = grid->t[last + k + 1] - grid->t[last + k];
        flow_step(blocks, dt, rng, system.drift ? &system.drift->a : nullptr);
        record_row(blocks, system.positions, system.survivor);
    }
    system.grid = std::move(grid);
}

FlowState flow_final_state(const std::vector<double>& points, double horizon,
                           double dt, RngStream& rng, const DriftSpec* drift) {
    auto blocks = initial_blocks(points, "flow_final_state");
    const std::size_t steps = step_count(horizon, dt, "flow_final_state");
    const double h = horizon / static_cast<double>(steps);
    const auto* a = drift ? &drift->a : nullptr;
    // same step arithmetic as the recording run (grid-time differences), so
    // the two agree bitwise draw for draw
    for (std::size_t k = 0; k < steps; ++k) {
        const double t0 = h * static_cast<double>(k);
        const double t1 = h * static_cast<double>(k + 1);
        flow_step(blocks, t1 - t0, rng, a);
    }

    FlowState state;
    state.positions.reserve(points.size());
    state.reps.reserve(points.size());
    for (const auto& blk : blocks)
        for (std::uint32_t i = blk.first; i <= blk.last; ++i) {
            state.positions.push_back(blk.pos);
            state.reps.push_back(blk.first);
        }
    state.n_blocks = blocks.size();
    return state;
}

ClusterSnapshot cluster_partition(const ParticleSystem& system) {
    if (!system.grid || system.n_times() == 0)
        bad("cluster_partition", "system not simulated");
    ClusterSnapshot snap;
    snap.horizon = system.grid->back();
    const std::size_t last = system.n_times() - 1;
    const std::size_t n = system.n();
    for (std::size_t i = 0; i < n;) {
        const std::uint32_t rep = system.rep(last, i);
        std::size_t j = i;
        while (j + 1 < n && system.rep(last, j + 1) == rep) ++j;
        snap.vertices.push_back(system.pos(last, i));
        snap.members.emplace_back(i, j);
        i = j + 1;
    }
    return snap;
}

std::size_t cluster_count(const ClusterSnapshot& snapshot,
                          const ParticleSystem& system, double a, double b) {
    std::size_t count = 0;
    for (std::size_t c = 0; c < snapshot.members.size(); ++c) {
        const auto [first, last] = snapshot.members[c];
        bool hit = false;
        for (std::size_t i = first; i <= last && !hit; ++i)
            hit = system.initial[i] >= a && system.initial[i] <= b;
        count += hit ? 1 : 0;
    }
    return count;
}

BoundaryPair sample_boundary_sde(double x, double T,
                                 std::shared_ptr<const TimeGrid> grid,
                                 RngStream& rng) {
    if (!(T > 0.0)) bad("sample_boundary_sde", "T must be positive");
    auto g = with_terminal(std::move(grid), T);
    const double t0 = g->front();
    if (!(t0 > 0.0)) bad("sample_boundary_sde", "grid must start after 0");

    // Entrance: the gap is sqrt(2) x a meander entrance draw (U = gap/sqrt(2)
    // solves the meander SDE exactly), the center an independent BM of
    // variance t/2 started at x.
    const double gap = std::sqrt(2.0) * entrance_sample(T, t0, rng.uniform());
    const double center = x + std::sqrt(0.5 * t0) * rng.gaussian();
    const double x0[2] = {center - 0.5 * gap, center + 0.5 * gap};

    static const DomainSpec wedge{Wedge2{}};
    const DriftField drift = [T](double t, std::span<const double> y,
                                 std::span<double> out) {
        const double m = halfline_drift(2.0 * (T - t), y[1] - y[0]);
        out[0] = -m;
        out[1] = m;
    };
    RetryPolicy policy;
    policy.drift_step_cap = 1.0;
    BoundaryPair pair;
    pair.path = euler_maruyama(drift, &wedge, std::span<const double>(x0, 2),
                               std::move(g), rng, policy);
    pair.path.tag = "sde";
    pair.x = x;
    pair.horizon = T;
    return pair;
}

BoundaryPair sample_boundary_oracle(double x, double epsilon, double T,
                                    std::shared_ptr<const TimeGrid> grid,
                                    RngStream& rng, std::size_t max_attempts) {
    if (!(T > 0.0)) bad("sample_boundary_oracle", "T must be positive");
    if (!(epsilon > 0.0)) bad("sample_boundary_oracle", "epsilon must be positive");
    auto g = with_origin(with_terminal(std::move(grid), T));
    const std::size_t n = g->n_times();

    std::vector<double> vals(2 * n);
    for (std::size_t attempt = 1; attempt <= max_attempts; ++attempt) {
        double lo = x - epsilon, hi = x + epsilon;
        vals[0] = lo;
        vals[1] = hi;
        bool apart = true;
        for (std::size_t k = 1; k < n; ++k) {
            const double sdt = std::sqrt(g->t[k] - g->t[k - 1]);
            lo += sdt * rng.gaussian();
            hi += sdt * rng.gaussian();
            if (lo >= hi) { // met at grid resolution: crossed or touched
                apart = false;
                break;
            }
            vals[2 * k] = lo;
            vals[2 * k + 1] = hi;
        }
        if (apart) {
            BoundaryPair pair;
            pair.path.dim = 2;
            pair.path.grid = std::move(g);
            pair.path.values = std::move(vals);
            pair.path.seed = rng.seed();
            pair.path.stream = rng.stream();
            pair.path.retries = attempt;
            pair.path.tag = "oracle";
            pair.x = x;
            pair.horizon = T;
            return pair;
        }
    }
    throw AttemptsExhausted("sample_boundary_oracle", max_attempts);
}

double stationary_point_estimate(const DriftSpec& drift, double lookback, double span,
                                 std::size_t n_particles, double dt, RngStream& rng) {
    if (!(drift.lambda > 0.0))
        bad("stationary_point_estimate", "drift must have lambda > 0");
    if (!(lookback > 0.0) || !(span > 0.0))
        bad("stationary_point_estimate", "lookback and span must be positive");
    if (n_particles < 2) bad("stationary_point_estimate", "need at least two particles");

    std::vector<double> points(n_particles);
    const double step = 2.0 * span / static_cast<double>(n_particles - 1);
    for (std::size_t i = 0; i < n_particles; ++i)
        points[i] = -span + step * static_cast<double>(i);

    const auto state = flow_final_state(points, lookback, dt, rng, &drift);
    if (state.n_blocks != 1) throw NotCoalesced(state.n_blocks);
    return state.positions.front();
}

BoundaryPair sample_infinite_cluster_sde(const DriftSpec& drift, double x,
                                         double horizon,
                                         std::shared_ptr<const TimeGrid> grid,
                                         RngStream& rng) {
    if (!(drift.lambda > 0.0))
        bad("sample_infinite_cluster_sde", "drift must have lambda > 0");
    if (!(horizon > 0.0)) bad("sample_infinite_cluster_sde", "horizon must be positive");
    if (!grid || grid->t.empty() || !(grid->front() > 0.0))
        bad("sample_infinite_cluster_sde", "grid must start after 0");
    const StationaryLaw& law = drift.law(); // built once, shared by copies

    const double t0 = grid->front();
    const double gap = std::sqrt(2.0) * entrance_sample(horizon, t0, rng.uniform());
    const double center = x + drift.a(x) * t0; // deterministic entrance center
    const double x0[2] = {center - 0.5 * gap, center + 0.5 * gap};

    static const DomainSpec wedge{Wedge2{}};
    const auto& a = drift.a;
    const DriftField field = [&law, &a](double, std::span<const double> y,
                                        std::span<double> out) {
        const double th = std::max(law.theta(y[0], y[1]), 1e-300);
        out[0] = -a(y[0]) - law.pdf(y[0]) / th;
        out[1] = -a(y[1]) + law.pdf(y[1]) / th;
    };
    RetryPolicy policy;
    policy.drift_step_cap = 1.0;
    BoundaryPair pair;
    pair.path = euler_maruyama(field, &wedge, std::span<const double>(x0, 2),
                               std::move(grid), rng, policy);
    pair.path.tag = "sde";
    pair.x = x;
    pair.horizon = horizon;
    return pair;
}

BoundaryPair sample_infinite_cluster_oracle(const DriftSpec& drift, double x,
                                            double epsilon, double horizon,
                                            std::shared_ptr<const TimeGrid> grid,
                                            RngStream& rng,
                                            std::size_t max_attempts) {
    if (!(horizon > 0.0))
        bad("sample_infinite_cluster_oracle", "horizon must be positive");
    if (!(epsilon > 0.0)) bad("sample_infinite_cluster_oracle", "epsilon must be positive");
    auto g = with_origin(with_terminal(std::move(grid), horizon));
    const std::size_t n = g->n_times();
    const auto& a = drift.a;

    std::vector<double> vals(2 * n);
    for (std::size_t attempt = 1; attempt <= max_attempts; ++attempt) {
        double lo = x - epsilon, hi = x + epsilon;
        vals[0] = lo;
        vals[1] = hi;
        bool apart = true;
        for (std::size_t k = 1; k < n; ++k) {
            const double dt = g->t[k] - g->t[k - 1];
            const double sdt = std::sqrt(dt);
            lo += -a(lo) * dt + sdt * rng.gaussian();
            hi += -a(hi) * dt + sdt * rng.gaussian();
            if (lo >= hi) {
                apart = false;
                break;
            }
            vals[2 * k] = lo;
            vals[2 * k + 1] = hi;
        }
        // the conditioning event also requires the pair to split around the
        // vertex; at the horizon the escape side is already decided
        if (apart && lo < x && x < hi) {
            BoundaryPair pair;
            pair.path.dim = 2;
            pair.path.grid = std::move(g);
            pair.path.values = std::move(vals);
            pair.path.seed = rng.seed();
            pair.path.stream = rng.stream();
            pair.path.retries = attempt;
            pair.path.tag = "oracle";
            pair.x = x;
            pair.horizon = horizon;
            return pair;
        }
    }
    throw AttemptsExhausted("sample_infinite_cluster_oracle", max_attempts);
}

} // namespace condbm
