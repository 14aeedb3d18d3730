#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "condbm/grid.hpp"
#include "condbm/rng.hpp"
#include "condbm/sde.hpp"

namespace condbm {

// Inverse-CDF draw from meander_entrance_density(T, eps0, .) at uniform u.
// Quantile tables (4096 nodes, monotone cubic in the u^{1/3} variable so the
// z ~ u^{1/3} behaviour at the origin is resolved) are cached per (T, eps0).
// Exposed because the wedge entrance laws reuse it at gap scale.
double entrance_sample(double T, double eps0, double u);

// Conditioned SDE: first value from the entrance law at t = grid.front(),
// then Euler-Maruyama with drift d/dy log gamma_{R+}(T-t, y) and half-line
// enforcement up to grid.back(), then the terminal stitch to T (plain
// Gaussian step over the last eps1, redrawn to stay positive). Requires
// 0 < grid.front() and grid.back() <= T.
PathRealization sample_meander_sde(double T, std::shared_ptr<const TimeGrid> grid,
                                   RngStream& rng);

// Exact Bessel-3 sampler: norm of a 3D Gaussian walk started at the origin,
// observed on the grid (extended to T if needed); weight attached is
// imhof_weight(T, Z(T)). No dynamics discretization error.
PathRealization sample_meander_bessel(double T, std::shared_ptr<const TimeGrid> grid,
                                      RngStream& rng);

// Rejection oracle: driftless BM from y0 at time 0, accepted iff every grid
// value is positive. The grid is extended to cover 0 and T when the input
// starts/ends at the conditioning cuts. PathRealization::retries records the
// attempts used.
PathRealization sample_meander_rejection(double T, double y0,
                                         std::shared_ptr<const TimeGrid> grid,
                                         RngStream& rng,
                                         std::size_t max_attempts = 1000000);

// sqrt(T) int_0^inf y^2 gamma_{R+}(T-t, sqrt(t) y) e^{-y^2/2} dy for
// t in [0, T]; adaptive quadrature, absolute error <= 1e-9. Equals
// E[meander(t)] in the y -> 0 limit; continuous in t with endpoint values
// 0 (t=0) and sqrt(pi T/2) (t=T).
double lemma1_rhs(double T, double t);

struct MeanderEnsemble {
    std::vector<PathRealization> paths;
    double horizon = 1.0;
    std::string sampler;          // "sde" | "bessel" | "rejection"
    double y0 = 0.0;              // rejection only
    double acceptance_rate = 0.0; // rejection only: n_paths / total attempts
};

// Runs one of the samplers N times with stream = stream_base + path index
// (parallel across paths; results independent of the thread count).
MeanderEnsemble sample_meander_ensemble(const std::string& method, double T,
                                        std::shared_ptr<const TimeGrid> grid,
                                        std::size_t n_paths, std::uint64_t seed,
                                        std::uint64_t stream_base, unsigned threads,
                                        double y0 = 0.0,
                                        std::size_t max_attempts = 1000000);

} // namespace condbm
