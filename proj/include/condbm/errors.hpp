#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace condbm {

// Simulation failures are runtime events (a run could not be completed with
// the requested discretization / attempt budget), distinct from precondition
// violations which throw std::invalid_argument. The CLI maps SimulationError
// to exit code 3 and std::invalid_argument to exit code 2.
class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Domain membership could not be restored by redraws followed by step
// halving; the grid is too coarse for the drift near this point.
class ExitFailure : public SimulationError {
public:
    ExitFailure(double t, std::size_t retries)
        : SimulationError("euler_maruyama: domain could not be maintained near t=" +
                          std::to_string(t) + " after " + std::to_string(retries) +
                          " redraws and the step-halving budget"),
          time(t), retries_used(retries) {}
    double time;
    std::size_t retries_used;
};

// The drift field returned a NaN/Inf; usually a boundary-asymptote bug in the
// caller's drift, never something to integrate through.
class NonFiniteDrift : public SimulationError {
public:
    explicit NonFiniteDrift(double t)
        : SimulationError("euler_maruyama: non-finite drift at t=" + std::to_string(t)),
          time(t) {}
    double time;
};

// A rejection sampler ran out of its attempt budget.
class AttemptsExhausted : public SimulationError {
public:
    AttemptsExhausted(const std::string& who, std::size_t attempts)
        : SimulationError(who + ": no accepted path after " + std::to_string(attempts) +
                          " attempts"),
          attempts_used(attempts) {}
    std::size_t attempts_used;
};

// stationary_point_estimate only succeeds on full coalescence; partial
// coalescence is reported, never silently averaged.
class NotCoalesced : public SimulationError {
public:
    explicit NotCoalesced(std::size_t n_survivors)
        : SimulationError("stationary_point_estimate: " + std::to_string(n_survivors) +
                          " particles still alive at time 0; increase lookback or span"),
          survivors(n_survivors) {}
    std::size_t survivors;
};

} // namespace condbm
