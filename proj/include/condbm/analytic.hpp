#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "condbm/domain.hpp"

namespace condbm {

inline constexpr double kSqrtPiOver2 = 1.2533141373155003; // sqrt(pi/2) = E(inf)

// E(x) = int_0^x exp(-u^2/2) du, odd, bounded by sqrt(pi/2). Absolute error
// <= 1e-12 (evaluated through the standard error function).
double gauss_integral(double x);

// gamma_G(t, y) = P(tau_G > t | B(0) = y) for the supported domains, in
// (0, 1]; clamped below at 1e-300 so downstream logarithms stay finite.
// Throws std::invalid_argument for t <= 0 or y outside the open set.
double exit_prob(const DomainSpec& domain, double t, std::span<const double> y);
double exit_prob(const DomainSpec& domain, double t, double y);

// grad_y log gamma_G(t, y) from the closed forms (no numerical
// differentiation). Same preconditions as exit_prob.
std::vector<double> grad_log_exit_prob(const DomainSpec& domain, double t,
                                       std::span<const double> y);
std::vector<double> grad_log_exit_prob(const DomainSpec& domain, double t, double y);

// d/dd log gamma_halfline(t, d) for boundary distance d > 0: the shared 1D
// drift kernel. Equals exp(-d^2/(2t)) / (sqrt(t) * E(d/sqrt(t))), evaluated
// so that 0 < value <= 1/d holds exactly in floating point (series for
// d/sqrt(t) < 1e-4, the asymptote 1/d below 1e-8, floor 1e-300 in the
// underflow regime). The Wedge2 components are +-halfline_drift(2t, y2-y1).
double halfline_drift(double t, double d);

// First-step law for the meander SDE at time s of horizon T:
//   f_s(z) = (sqrt(T)/s^{3/2}) z exp(-z^2/(2s)) gamma_{R+}(T-s, z) / N(s,T),
// N computed once by quadrature and cached per (T, s).
double meander_entrance_density(double T, double s, double z);

// Radon-Nikodym weight of the meander law w.r.t. Bessel-3 on [0,T]:
// sqrt(pi T) / (sqrt(2) z_T). Throws for z_T <= 0 (Bessel-3 endpoints are
// a.s. positive; zero means an upstream bug).
double imhof_weight(double T, double z_T);

class StationaryLaw;

// Drift a(x) of the drifted Arratia flow, with its Lipschitz constant L and
// the one-sided monotonicity constant lambda > 0:
//   (a(x) - a(y))(x - y) <= -lambda (x - y)^2.
// The antiderivative A(x) = int_0^x a(u) du may be supplied in closed form;
// otherwise it is accumulated numerically when the stationary law is built.
struct DriftSpec {
    DriftSpec() = default;
    DriftSpec(std::function<double(double)> a_fn, double L, double lam,
              std::function<double(double)> A_fn = {})
        : a(std::move(a_fn)), lipschitz(L), lambda(lam),
          antiderivative(std::move(A_fn)) {}

    std::function<double(double)> a;
    double lipschitz = 0.0;
    double lambda = 0.0;
    std::function<double(double)> antiderivative;

    // Checks the monotonicity invariant on a sampled grid; throws
    // std::invalid_argument at the first violating pair.
    void check_monotone_on(std::span<const double> xs, double tol = 1e-12) const;

    // Stationary law pi ~ C exp(2A); built lazily, cached, race-free
    // (copies of this DriftSpec share the cache).
    const StationaryLaw& law() const;

private:
    struct LawCache {
        std::once_flag once;
        std::shared_ptr<const StationaryLaw> law;
    };
    std::shared_ptr<LawCache> cache_ = std::make_shared<LawCache>();
};

// Normalized stationary density pi(x) = C exp(2 A(x)) of
// dX = a(X)dt + dW (Einstein relation for unit diffusion), tabulated on
// [mode - R, mode + R] with R = 14/sqrt(lambda) (tail mass < 1e-80).
class StationaryLaw {
public:
    explicit StationaryLaw(const DriftSpec& drift);

    double pdf(double x) const;
    double cdf(double x) const; // 0 below the table range, 1 above
    // theta(y1, y2) = P(eta in (y1, y2)); requires y1 < y2 (infinite
    // endpoints allowed). Small gaps evaluate a direct Gauss-Legendre
    // integral of pdf (no cancellation), larger ones a CDF difference.
    double theta(double y1, double y2) const;

    double lo() const { return lo_; }
    double hi() const { return hi_; }

private:
    double interp_A(double x) const;

    double lo_ = 0, hi_ = 0, h_ = 0;
    double norm_ = 0;                // C = 1 / int exp(2A)
    std::vector<double> A_, a_;      // antiderivative and slope at the nodes
    std::vector<double> cum_, pdf_;  // CDF and density at the nodes
};

double stationary_density(const DriftSpec& drift, double x);
double theta(const DriftSpec& drift, double y1, double y2);

// Empirical Lipschitz / monotonicity constants of a drift sampled on
// [lo, hi]; used by the CLI when the user supplies only an expression.
struct DriftConstants {
    double lipschitz;
    double lambda;
};
DriftConstants estimate_drift_constants(const std::function<double(double)>& a,
                                        double lo, double hi, std::size_t n = 4096);

} // namespace condbm
