#include "condbm/sde.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "condbm/errors.hpp"

namespace condbm {

namespace {

struct Stepper {
    const DriftField& drift;
    const DomainSpec* domain;
    RngStream& rng;
    const RetryPolicy& policy;
    std::size_t dim;

    std::vector<double> times;
    std::vector<double> values;
    std::size_t total_retries = 0;
    bool inserted = false;

    std::vector<double> b;  // drift buffer
    std::vector<double> y1; // proposal buffer

    void record(double t, const std::vector<double>& y) {
        times.push_back(t);
        values.insert(values.end(), y.begin(), y.end());
    }

    // One Euler step from y over [t0, t1], redrawing the Gaussian when the
    // proposal leaves the domain; on exhaustion the interval is halved (the
    // midpoint becomes a grid point) until max_halvings is reached.
    void advance(std::vector<double>& y, double t0, double t1, int depth) {
        const double dt = t1 - t0;
        const double sdt = std::sqrt(dt);
        drift(t0, y, b);
        for (std::size_t j = 0; j < dim; ++j)
            if (!std::isfinite(b[j])) throw NonFiniteDrift(t0);
        const double cap = policy.drift_step_cap * sdt;
        for (int attempt = 0; attempt <= policy.max_retries; ++attempt) {
            for (std::size_t j = 0; j < dim; ++j) {
                const double inc = std::clamp(b[j] * dt, -cap, cap);
                y1[j] = y[j] + inc + sdt * rng.gaussian();
            }
            if (!domain || domain->membership(y1)) {
                y = y1;
                record(t1, y);
                return;
            }
            ++total_retries;
        }
        if (depth >= policy.max_halvings) throw ExitFailure(t0, total_retries);
        inserted = true;
        const double tm = 0.5 * (t0 + t1);
        advance(y, t0, tm, depth + 1);
        advance(y, tm, t1, depth + 1);
    }
};

} // namespace

PathRealization euler_maruyama(const DriftField& drift, const DomainSpec* domain,
                               std::span<const double> x0,
                               std::shared_ptr<const TimeGrid> grid, RngStream& rng,
                               const RetryPolicy& policy) {
    if (!drift) throw std::invalid_argument("euler_maruyama: no drift field");
    if (!grid || grid->t.size() < 2)
        throw std::invalid_argument("euler_maruyama: grid needs at least two times");
    if (x0.empty()) throw std::invalid_argument("euler_maruyama: empty start point");
    if (domain) {
        if (domain->dim() != x0.size())
            throw std::invalid_argument("euler_maruyama: domain/start dimension mismatch");
        if (!domain->membership(x0))
            throw std::invalid_argument("euler_maruyama: start point not interior");
    }
    for (std::size_t k = 1; k < grid->t.size(); ++k)
        if (!(grid->t[k] > grid->t[k - 1]))
            throw std::invalid_argument("euler_maruyama: grid not strictly increasing");

    const std::size_t dim = x0.size();
    Stepper st{drift, domain, rng, policy, dim, {}, {}, 0, false,
               std::vector<double>(dim), std::vector<double>(dim)};
    st.times.reserve(grid->n_times());
    st.values.reserve(grid->n_times() * dim);

    std::vector<double> y(x0.begin(), x0.end());
    st.record(grid->t.front(), y);
    for (std::size_t k = 0; k + 1 < grid->t.size(); ++k)
        st.advance(y, grid->t[k], grid->t[k + 1], 0);

    PathRealization path;
    path.dim = dim;
    path.weight = 1.0;
    path.seed = rng.seed();
    path.stream = rng.stream();
    path.retries = st.total_retries;
    if (!st.inserted) {
        path.grid = std::move(grid);
    } else {
        auto g = std::make_shared<TimeGrid>(*grid);
        g->t = std::move(st.times);
        path.grid = std::move(g);
    }
    path.values = std::move(st.values);
    return path;
}

std::optional<double> first_exit_time(const PathRealization& path,
                                      const DomainSpec& domain) {
    if (!path.grid) throw std::invalid_argument("first_exit_time: path has no grid");
    if (path.dim != domain.dim())
        throw std::invalid_argument("first_exit_time: dimension mismatch");
    for (std::size_t k = 0; k < path.n_times(); ++k) {
        const std::span<const double> row(path.values.data() + k * path.dim, path.dim);
        if (!domain.in_closure(row)) return path.grid->t[k];
    }
    return std::nullopt;
}

} // namespace condbm
