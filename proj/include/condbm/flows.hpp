#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "condbm/analytic.hpp"
#include "condbm/grid.hpp"
#include "condbm/rng.hpp"
#include "condbm/sde.hpp"

namespace condbm {

// n-point motion of the (possibly drifted) Arratia flow at grid resolution.
// positions/survivor are row-major n_times x n: for every initial index i,
// pos(k, i) is the position of i's block at time t_k and rep(k, i) the
// smallest initial index of that block (the canonical survivor id). Order
// preservation — pos(k, .) nondecreasing — holds by construction.
struct ParticleSystem {
    std::vector<double> initial; // strictly increasing starting points
    std::shared_ptr<const TimeGrid> grid;
    std::vector<double> positions;
    std::vector<std::uint32_t> survivor;
    std::optional<DriftSpec> drift;

    std::size_t n() const { return initial.size(); }
    std::size_t n_times() const { return grid ? grid->n_times() : 0; }
    double pos(std::size_t k, std::size_t i) const { return positions[k * n() + i]; }
    std::uint32_t rep(std::size_t k, std::size_t i) const { return survivor[k * n() + i]; }
};

// Each live block advances by an independent Euler step (streams are
// consumed in ascending block order, so a run over [0,T] and a run over
// [0,T/2] followed by continue_coalescing use identical draws); the merge
// sweep then collapses adjacent blocks whose order inverted or whose
// positions coincide to the midpoint of the crossed values, cascading until
// sorted. A supplied drift is copied into the returned system.
ParticleSystem simulate_coalescing(std::vector<double> points, double horizon,
                                   double dt, RngStream& rng,
                                   const DriftSpec* drift = nullptr);

// Extends a simulated system by extra_horizon with the same step size,
// continuing the same RNG stream: composition equals one longer call.
void continue_coalescing(ParticleSystem& system, double extra_horizon, RngStream& rng);

// Final state only (no trajectory recording): identical draws and merges to
// simulate_coalescing, used where only the horizon census matters.
struct FlowState {
    std::vector<double> positions;     // per initial index, block position at horizon
    std::vector<std::uint32_t> reps;   // per initial index, canonical survivor id
    std::size_t n_blocks = 0;
};
FlowState flow_final_state(const std::vector<double>& points, double horizon,
                           double dt, RngStream& rng,
                           const DriftSpec* drift = nullptr);

// Horizon census: surviving positions (vertices) and the contiguous
// initial-index interval [first, last] merged into each.
struct ClusterSnapshot {
    double horizon = 0.0;
    std::vector<double> vertices;
    std::vector<std::pair<std::size_t, std::size_t>> members;
};
ClusterSnapshot cluster_partition(const ParticleSystem& system);

// Empirical N_T(a, b): number of distinct survivors among starts in [a, b].
std::size_t cluster_count(const ClusterSnapshot& snapshot,
                          const ParticleSystem& system, double a, double b);

// Cluster-boundary pair (alpha(t), beta(t)) around vertex x; path.dim == 2.
struct BoundaryPair {
    PathRealization path;
    double x = 0.0;
    double horizon = 0.0;

    double alpha(std::size_t k) const { return path.value(k, 0); }
    double beta(std::size_t k) const { return path.value(k, 1); }
    double gap(std::size_t k) const { return beta(k) - alpha(k); }
};

// Conditioned pair SDE in the wedge {y1 < y2} with drift
// grad log gamma_Wedge2(T - t, .). Entrance at t = grid.front(): gap
// sqrt(2) * meander entrance draw, center x + N(0, eps0/2) (the center is a
// driftless BM of variance t/2, independent of the gap). Terminal stitch to
// T as in the meander sampler. Requires 0 < grid.front(), grid.back() <= T.
BoundaryPair sample_boundary_sde(double x, double T,
                                 std::shared_ptr<const TimeGrid> grid, RngStream& rng);

// Dual-trajectory rejection oracle: two independent driftless BMs from
// x -+ epsilon, accepted iff they never meet (cross or touch) at any grid
// time in [0, T]. Grid extended to cover 0 and T when needed.
BoundaryPair sample_boundary_oracle(double x, double epsilon, double T,
                                    std::shared_ptr<const TimeGrid> grid,
                                    RngStream& rng, std::size_t max_attempts = 1000000);

// Backward-flow stationary point: n_particles equally spaced on
// [-span, span], coalescing with drift a over duration lookback; returns the
// single survivor's position at time 0, throws NotCoalesced (with the
// surviving count) otherwise.
double stationary_point_estimate(const DriftSpec& drift, double lookback, double span,
                                 std::size_t n_particles, double dt, RngStream& rng);

// Infinite-cluster boundary pair: drift components
// -a(Y_i) + d/dy_i log theta(Y1, Y2) with theta from the stationary law;
// entrance gap sqrt(2) * meander entrance draw at scale eps0 (meander
// horizon = this horizon), entrance center x + a(x) eps0 (deterministic).
// The drift is time-homogeneous, so the grid may end at the horizon itself
// (no terminal cut needed). Requires lambda > 0 and 0 < grid.front().
BoundaryPair sample_infinite_cluster_sde(const DriftSpec& drift, double x,
                                         double horizon,
                                         std::shared_ptr<const TimeGrid> grid,
                                         RngStream& rng);

// Rejection oracle for the same law: two independent solutions of
// dX = -a(X) dt + dW from x -+ epsilon, accepted iff they never meet on
// [0, horizon] and straddle x at the horizon. The target event is
// {never meet, Y1 -> -inf, Y2 -> +inf}; never-meeting alone is not enough,
// since a pair can escape to the same infinity with the vertex outside it
// (the center's and the gap's exponential growth rates are independent).
// Under the expanding dual drift the escape side is settled exponentially
// fast, so for horizon >> 1/lambda the straddle check at the horizon reads
// off the limit with error O(exp(-lambda * horizon)).
BoundaryPair sample_infinite_cluster_oracle(const DriftSpec& drift, double x,
                                            double epsilon, double horizon,
                                            std::shared_ptr<const TimeGrid> grid,
                                            RngStream& rng,
                                            std::size_t max_attempts = 1000000);

} // namespace condbm
