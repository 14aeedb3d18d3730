#pragma once

#include <cstddef>
#include <memory>
#include <vector>

namespace condbm {

// Strictly increasing times on [eps0, T - eps1]. Endpoints with a positive
// offset are "refined": the adjacent uniform step is subdivided into
// geometrically shrinking steps (ratio 1/2) so the integrator resolves the
// drift singularities at the cuts.
struct TimeGrid {
    std::vector<double> t;
    double horizon = 0.0; // T
    double eps0 = 0.0;
    double eps1 = 0.0;
    double dt_max = 0.0; // largest step by construction (the uniform h)
    int refine_levels = 0;

    std::size_t n_times() const { return t.size(); }
    std::size_t n_steps() const { return t.empty() ? 0 : t.size() - 1; }
    double front() const { return t.front(); }
    double back() const { return t.back(); }
};

// n_uniform interior steps on [eps0, T-eps1] plus refine_levels halving
// steps at each refined endpoint. Total step count is n_uniform +
// levels * (number of endpoints with positive offset).
TimeGrid make_grid(double T, std::size_t n_uniform, double eps0, double eps1,
                   int refine_levels);

// Same, choosing n_uniform = ceil((T - eps0 - eps1) / dt_target) so the
// uniform step never exceeds dt_target.
TimeGrid make_grid_dt(double T, double dt_target, double eps0, double eps1,
                      int refine_levels);

// Entrance-graded grid: from t0 the step grows with the current time
// (dt = growth * t) until it reaches dt_max, then a uniform tail runs to T.
// Bounding the relative step keeps the integrator's weak error under control
// across Bessel-type entrances, where the drift scales like 1/sqrt(t) and any
// fixed step over-shoots the early transient no matter how small it is.
TimeGrid make_grid_graded(double T, double dt_max, double t0, double growth);

// Grid with time T appended (the terminal stitch point); no-op copy when the
// grid already ends at T.
std::shared_ptr<const TimeGrid> with_terminal(std::shared_ptr<const TimeGrid> grid,
                                              double T);

// Grid with time 0 prepended (rejection oracles start at t=0).
std::shared_ptr<const TimeGrid> with_origin(std::shared_ptr<const TimeGrid> grid);

} // namespace condbm
