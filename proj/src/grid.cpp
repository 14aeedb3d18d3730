#include "condbm/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace condbm {

namespace {

[[noreturn]] void bad(const char* what) {
    throw std::invalid_argument(std::string("make_grid: ") + what);
}

// Geometric refinement: replaces the step [cut_adjacent, cut_adjacent +- h]
// with `levels` extra points halving toward the cut.
void append_refined_head(std::vector<double>& out, double lo, double h, int levels) {
    // lo, lo + h/2^levels, lo + h/2^(levels-1), ..., lo + h/2
    out.push_back(lo);
    for (int k = levels; k >= 1; --k) out.push_back(lo + std::ldexp(h, -k));
}

} // namespace

TimeGrid make_grid(double T, std::size_t n_uniform, double eps0, double eps1,
                   int refine_levels) {
    if (!(T > 0.0) || !std::isfinite(T)) bad("T must be positive and finite");
    if (eps0 < 0.0 || eps1 < 0.0) bad("offsets must be nonnegative");
    if (n_uniform == 0) bad("need at least one uniform step");
    if (refine_levels < 0) bad("refine_levels must be nonnegative");
    const double span = T - eps0 - eps1;
    if (!(span > 0.0)) bad("eps0 + eps1 must leave a positive span");

    const double h = span / static_cast<double>(n_uniform);
    TimeGrid g;
    g.horizon = T;
    g.eps0 = eps0;
    g.eps1 = eps1;
    g.dt_max = h;
    g.refine_levels = refine_levels;
    g.t.reserve(n_uniform + 1 + 2 * static_cast<std::size_t>(refine_levels));

    const bool refine_start = refine_levels > 0 && eps0 > 0.0;
    const bool refine_end = refine_levels > 0 && eps1 > 0.0;

    if (refine_start) append_refined_head(g.t, eps0, h, refine_levels);
    else g.t.push_back(eps0);
    // interior uniform nodes eps0 + k h, k = 1..n-1
    for (std::size_t k = 1; k < n_uniform; ++k)
        g.t.push_back(eps0 + h * static_cast<double>(k));
    if (refine_end) {
        // mirror image of the head: ..., end - h/2, ..., end - h/2^levels, end
        const double end = T - eps1;
        for (int k = 1; k <= refine_levels; ++k) g.t.push_back(end - std::ldexp(h, -k));
        g.t.push_back(end);
    } else {
        g.t.push_back(T - eps1);
    }
    return g;
}

TimeGrid make_grid_dt(double T, double dt_target, double eps0, double eps1,
                      int refine_levels) {
    if (!(dt_target > 0.0)) bad("dt_target must be positive");
    const double span = T - eps0 - eps1;
    if (!(span > 0.0)) bad("eps0 + eps1 must leave a positive span");
    const auto n = static_cast<std::size_t>(std::ceil(span / dt_target - 1e-9));
    return make_grid(T, n == 0 ? 1 : n, eps0, eps1, refine_levels);
}

TimeGrid make_grid_graded(double T, double dt_max, double t0, double growth) {
    if (!(T > 0.0) || !std::isfinite(T)) bad("T must be positive and finite");
    if (!(dt_max > 0.0)) bad("dt_max must be positive");
    if (!(t0 > 0.0) || !(t0 < T)) bad("need 0 < t0 < T");
    if (!(growth > 0.0) || !(growth <= 1.0)) bad("growth must be in (0, 1]");

    TimeGrid g;
    g.horizon = T;
    g.eps0 = t0;
    g.dt_max = dt_max;

    double t = t0;
    g.t.push_back(t);
    while (growth * t < dt_max && t + growth * t < T - dt_max) {
        t += growth * t;
        g.t.push_back(t);
    }
    const double span = T - t;
    const auto n = static_cast<std::size_t>(
        std::max(1.0, std::ceil(span / dt_max - 1e-9)));
    for (std::size_t k = 1; k < n; ++k)
        g.t.push_back(t + span * static_cast<double>(k) / static_cast<double>(n));
    g.t.push_back(T);
    return g;
}

std::shared_ptr<const TimeGrid> with_terminal(std::shared_ptr<const TimeGrid> grid,
                                              double T) {
    if (!grid || grid->t.empty()) throw std::invalid_argument("with_terminal: empty grid");
    if (grid->back() == T) return grid;
    if (grid->back() > T) throw std::invalid_argument("with_terminal: grid ends past T");
    auto g = std::make_shared<TimeGrid>(*grid);
    g->t.push_back(T);
    g->horizon = T;
    return g;
}

std::shared_ptr<const TimeGrid> with_origin(std::shared_ptr<const TimeGrid> grid) {
    if (!grid || grid->t.empty()) throw std::invalid_argument("with_origin: empty grid");
    if (grid->front() == 0.0) return grid;
    if (grid->front() < 0.0) throw std::invalid_argument("with_origin: negative start");
    auto g = std::make_shared<TimeGrid>(*grid);
    g->t.insert(g->t.begin(), 0.0);
    return g;
}

} // namespace condbm
