#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "condbm/domain.hpp"
#include "condbm/grid.hpp"
#include "condbm/rng.hpp"

namespace condbm {

// One sampled trajectory on a time grid. values is row-major per time
// (n_times * dim doubles); weight defaults to 1 and is only != 1 for the
// Bessel-3 importance sampler.
struct PathRealization {
    std::shared_ptr<const TimeGrid> grid;
    std::size_t dim = 1;
    std::vector<double> values;
    double weight = 1.0;
    std::string tag;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::size_t retries = 0; // redraw count (SDE) or attempt count (rejection)

    std::size_t n_times() const { return grid ? grid->n_times() : 0; }
    double time(std::size_t k) const { return grid->t[k]; }
    double value(std::size_t k, std::size_t j = 0) const {
        return values[k * dim + j];
    }
    double back(std::size_t j = 0) const {
        return values[values.size() - dim + j];
    }
};

struct RetryPolicy {
    int max_retries = 32;  // redraws of the Gaussian before halving the step
    int max_halvings = 10; // step halvings (each inserts a grid point)
    // Per-component clamp on the drift increment, in units of sqrt(dt):
    // |b_i * dt| <= drift_step_cap * sqrt(dt). Off by default; the
    // conditioned samplers set 1.0, where the bound b <= 1/d makes the cap
    // inactive for d >= sqrt(dt) and it only tames the explicit-Euler
    // catapult from points far inside the boundary layer.
    double drift_step_cap = std::numeric_limits<double>::infinity();
};

using DriftField =
    std::function<void(double t, std::span<const double> y, std::span<double> out)>;

// Euler-Maruyama on the grid: Y_{k+1} = Y_k + b(t_k, Y_k) dt_k + sqrt(dt_k) xi.
// With a domain, an exiting proposal redraws xi up to max_retries times, then
// the step is halved (inserting a grid point) up to max_halvings times;
// ExitFailure if the domain still cannot be maintained. The returned path
// shares the input grid unless halvings inserted points. Total redraws are
// recorded in PathRealization::retries.
PathRealization euler_maruyama(const DriftField& drift, const DomainSpec* domain,
                               std::span<const double> x0,
                               std::shared_ptr<const TimeGrid> grid, RngStream& rng,
                               const RetryPolicy& policy = {});

// Smallest grid time whose value lies strictly outside the closure of the
// domain; grid resolution is the contract (no sub-grid refinement).
std::optional<double> first_exit_time(const PathRealization& path,
                                      const DomainSpec& domain);

} // namespace condbm
