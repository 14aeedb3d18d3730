#include "condbm/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace condbm {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kInvSqrt2 = 0.7071067811865475244008443621048490393;
constexpr double kProbFloor = 1e-300; // clamp before logarithms

double phi_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi); }
double phi_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }

[[noreturn]] void bad_arg(const std::string& op, const std::string& what) {
    throw std::invalid_argument(op + ": " + what);
}

void require_time(const std::string& op, double t) {
    if (!(t > 0.0) || !std::isfinite(t)) bad_arg(op, "t must be positive and finite");
}

// ---- Interval(0,L): spectral form for t >= 0.05 L^2, image method below ----
// The two branches agree to 1e-10 at the crossover (asserted in the tests).

double interval_gamma(double t, double y, double L) {
    if (t < 0.05 * L * L) {
        // Reflection (image) sum: integrate the killed kernel over (0,L).
        // Images beyond |n|=2 contribute < exp(-40) for t <= 0.05 L^2.
        const double st = std::sqrt(t);
        double s = 0.0;
        for (int n = -2; n <= 2; ++n) {
            const double c = 2.0 * n * L;
            s += phi_cdf((L - y - c) / st) - phi_cdf((-y - c) / st) -
                 phi_cdf((L + y - c) / st) + phi_cdf((y - c) / st);
        }
        return s;
    }
    const double q = kPi * kPi * t / (2.0 * L * L);
    double s = 0.0;
    for (int n = 1; n < 9999; n += 2) {
        const double amp = 4.0 / (n * kPi) * std::exp(-static_cast<double>(n) * n * q);
        if (amp < 1e-14) break; // term bound below target accuracy
        s += amp * std::sin(n * kPi * y / L);
    }
    return s;
}

double interval_dgamma(double t, double y, double L) { // d/dy of interval_gamma
    if (t < 0.05 * L * L) {
        const double st = std::sqrt(t);
        double s = 0.0;
        for (int n = -2; n <= 2; ++n) {
            const double c = 2.0 * n * L;
            s += (-phi_pdf((L - y - c) / st) + phi_pdf((-y - c) / st) -
                  phi_pdf((L + y - c) / st) + phi_pdf((y - c) / st)) /
                 st;
        }
        return s;
    }
    const double q = kPi * kPi * t / (2.0 * L * L);
    double s = 0.0;
    for (int n = 1; n < 9999; n += 2) {
        const double damp = std::exp(-static_cast<double>(n) * n * q);
        if (4.0 / L * damp < 1e-15) break;
        s += 4.0 / L * damp * std::cos(n * kPi * y / L);
    }
    return s;
}

double clamp_prob(double g) { return std::min(1.0, std::max(kProbFloor, g)); }

// Per-factor helpers shared by Box.
double factor_gamma(const Factor1d& f, double t, double y) {
    if (const auto* h = std::get_if<HalfLine>(&f)) {
        const double d = h->direction * (y - h->origin);
        return clamp_prob(std::erf(d * kInvSqrt2 / std::sqrt(t)));
    }
    const auto& iv = std::get<Interval>(f);
    return clamp_prob(interval_gamma(t, y - iv.a, iv.b - iv.a));
}

double factor_drift(const Factor1d& f, double t, double y) {
    if (const auto* h = std::get_if<HalfLine>(&f)) {
        const double d = h->direction * (y - h->origin);
        return h->direction * halfline_drift(t, d);
    }
    const auto& iv = std::get<Interval>(f);
    const double yy = y - iv.a, L = iv.b - iv.a;
    return interval_dgamma(t, yy, L) / clamp_prob(interval_gamma(t, yy, L));
}

} // namespace

double gauss_integral(double x) {
    // E(x) = int_0^x exp(-u^2/2) du = sqrt(pi/2) erf(x/sqrt(2))
    return kSqrtPiOver2 * std::erf(x * kInvSqrt2);
}

double halfline_drift(double t, double d) {
    const double st = std::sqrt(t);
    const double s = d / st;
    if (s < 1e-8) return 1.0 / d; // exact ratio is 0/0 at machine precision
    if (s < 1e-4) {
        // s e^{-s^2/2}/E(s) = 1 - s^2/3 + 2 s^4/45 - O(s^6); the series keeps
        // the bound drift <= 1/d exact in floating point, where the direct
        // ratio would cancel at roundoff scale.
        const double s2 = s * s;
        return (1.0 - s2 / 3.0 + s2 * s2 * (2.0 / 45.0)) / d;
    }
    const double v = std::exp(-0.5 * s * s) / (st * gauss_integral(s));
    // Same treatment as the probability clamp: the value is positive but may
    // underflow for deep-in-the-bulk queries; keep it strictly positive.
    return v > kProbFloor ? v : kProbFloor;
}

double exit_prob(const DomainSpec& domain, double t, std::span<const double> y) {
    require_time("exit_prob", t);
    if (y.size() != domain.dim()) bad_arg("exit_prob", "dimension mismatch");
    if (!domain.membership(y)) bad_arg("exit_prob", "y is not interior to the domain");

    return std::visit(
        [&](const auto& shape) -> double {
            using S = std::decay_t<decltype(shape)>;
            if constexpr (std::is_same_v<S, HalfLine>) {
                const double d = shape.direction * (y[0] - shape.origin);
                return clamp_prob(std::erf(d * kInvSqrt2 / std::sqrt(t)));
            } else if constexpr (std::is_same_v<S, Interval>) {
                return clamp_prob(interval_gamma(t, y[0] - shape.a, shape.b - shape.a));
            } else if constexpr (std::is_same_v<S, HalfSpace>) {
                double d = 0.0;
                for (std::size_t j = 0; j < y.size(); ++j)
                    d += (y[j] - shape.anchor[j]) * shape.normal[j];
                return clamp_prob(std::erf(d * kInvSqrt2 / std::sqrt(t)));
            } else if constexpr (std::is_same_v<S, Box>) {
                double p = 1.0;
                for (std::size_t j = 0; j < shape.factors.size(); ++j)
                    p *= factor_gamma(shape.factors[j], t, y[j]);
                return clamp_prob(p);
            } else { // Wedge2: the difference is a BM of variance 2t
                const double g = y[1] - y[0];
                return clamp_prob(std::erf(g / (2.0 * std::sqrt(t))));
            }
        },
        domain.shape());
}

double exit_prob(const DomainSpec& domain, double t, double y) {
    return exit_prob(domain, t, std::span<const double>(&y, 1));
}

std::vector<double> grad_log_exit_prob(const DomainSpec& domain, double t,
                                       std::span<const double> y) {
    require_time("grad_log_exit_prob", t);
    if (y.size() != domain.dim()) bad_arg("grad_log_exit_prob", "dimension mismatch");
    if (!domain.membership(y))
        bad_arg("grad_log_exit_prob", "y is not interior to the domain");

    return std::visit(
        [&](const auto& shape) -> std::vector<double> {
            using S = std::decay_t<decltype(shape)>;
            if constexpr (std::is_same_v<S, HalfLine>) {
                const double d = shape.direction * (y[0] - shape.origin);
                return {shape.direction * halfline_drift(t, d)};
            } else if constexpr (std::is_same_v<S, Interval>) {
                const double yy = y[0] - shape.a, L = shape.b - shape.a;
                return {interval_dgamma(t, yy, L) / clamp_prob(interval_gamma(t, yy, L))};
            } else if constexpr (std::is_same_v<S, HalfSpace>) {
                double d = 0.0;
                for (std::size_t j = 0; j < y.size(); ++j)
                    d += (y[j] - shape.anchor[j]) * shape.normal[j];
                const double m = halfline_drift(t, d);
                std::vector<double> g(y.size());
                for (std::size_t j = 0; j < y.size(); ++j) g[j] = shape.normal[j] * m;
                return g;
            } else if constexpr (std::is_same_v<S, Box>) {
                std::vector<double> g(y.size());
                for (std::size_t j = 0; j < shape.factors.size(); ++j)
                    g[j] = factor_drift(shape.factors[j], t, y[j]);
                return g;
            } else {
                // Wedge2 depends on the gap only; differentiating
                // gamma = erf((y2-y1)/(2 sqrt(t))) gives components
                // -+ e^{-g^2/(4t)} / (sqrt(2t) E(g/sqrt(2t))), which is the
                // half-line kernel evaluated at (2t, g).
                const double m = halfline_drift(2.0 * t, y[1] - y[0]);
                return {-m, m};
            }
        },
        domain.shape());
}

std::vector<double> grad_log_exit_prob(const DomainSpec& domain, double t, double y) {
    return grad_log_exit_prob(domain, t, std::span<const double>(&y, 1));
}

// ---- meander entrance law ----

namespace {

double entrance_raw(double T, double s, double z) {
    return std::sqrt(T) / (s * std::sqrt(s)) * z * std::exp(-0.5 * z * z / s) *
           std::erf(z * kInvSqrt2 / std::sqrt(T - s));
}

double entrance_normalizer(double T, double s) {
    static std::mutex mu;
    static std::map<std::pair<double, double>, double> cache;
    const std::pair<double, double> key{T, s};
    {
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }
    // Everything beyond z_hi is below the exp underflow threshold.
    const double z_hi = std::sqrt(2.0 * 709.0 * s);
    const double n = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        [T, s](double z) { return entrance_raw(T, s, z); }, 0.0, z_hi, 15, 1e-12);
    std::lock_guard<std::mutex> lock(mu);
    cache.emplace(key, n);
    return n;
}

} // namespace

double meander_entrance_density(double T, double s, double z) {
    if (!(T > 0.0)) bad_arg("meander_entrance_density", "T must be positive");
    if (!(s > 0.0 && s < T)) bad_arg("meander_entrance_density", "s must lie in (0,T)");
    if (!(z > 0.0)) bad_arg("meander_entrance_density", "z must be positive");
    return entrance_raw(T, s, z) / entrance_normalizer(T, s);
}

double imhof_weight(double T, double z_T) {
    if (!(T > 0.0)) bad_arg("imhof_weight", "T must be positive");
    if (!(z_T > 0.0))
        bad_arg("imhof_weight", "z_T must be positive (upstream Bessel-3 bug?)");
    return std::sqrt(kPi * T * 0.5) / z_T;
}

// ---- DriftSpec / stationary law ----

void DriftSpec::check_monotone_on(std::span<const double> xs, double tol) const {
    if (!a) bad_arg("DriftSpec", "no drift function set");
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        const double dx = xs[i + 1] - xs[i];
        if (!(dx > 0.0)) bad_arg("DriftSpec::check_monotone_on", "grid not increasing");
        const double lhs = (a(xs[i + 1]) - a(xs[i])) * dx;
        if (lhs > -lambda * dx * dx + tol) {
            std::ostringstream os;
            os << "DriftSpec: monotonicity constant lambda=" << lambda
               << " violated on [" << xs[i] << ", " << xs[i + 1] << "]";
            throw std::invalid_argument(os.str());
        }
    }
}

const StationaryLaw& DriftSpec::law() const {
    std::call_once(cache_->once,
                   [this] { cache_->law = std::make_shared<StationaryLaw>(*this); });
    return *cache_->law;
}

StationaryLaw::StationaryLaw(const DriftSpec& drift) {
    if (!drift.a) bad_arg("StationaryLaw", "no drift function set");
    if (!(drift.lambda > 0.0))
        bad_arg("StationaryLaw", "lambda must be positive for a stationary law");
    const auto& a = drift.a;

    // a is strictly decreasing (lambda > 0), so it has a unique zero: the
    // mode of pi. Bracket by doubling, then bisect.
    double mode = 0.0;
    {
        double x0 = 0.0, f0 = a(0.0);
        if (f0 != 0.0) {
            const int dir = f0 > 0.0 ? +1 : -1;
            double step = 1.0, x1 = 0.0, f1 = f0;
            bool bracketed = false;
            for (int i = 0; i < 200; ++i) {
                x1 = x0 + dir * step;
                f1 = a(x1);
                if ((f0 > 0.0) != (f1 > 0.0)) {
                    bracketed = true;
                    break;
                }
                step *= 2.0;
            }
            if (!bracketed || !std::isfinite(f1))
                bad_arg("StationaryLaw",
                        "normalizer quadrature failed to converge (no zero of a)");
            double lo = std::min(x0, x1), hi = std::max(x0, x1);
            for (int i = 0; i < 200; ++i) {
                const double m = 0.5 * (lo + hi);
                if ((a(m) > 0.0) == (a(lo) > 0.0))
                    lo = m;
                else
                    hi = m;
            }
            mode = 0.5 * (lo + hi);
        }
    }

    // pi(x) <= pi(mode) exp(-lambda (x-mode)^2), so 14/sqrt(lambda) of range
    // leaves < 1e-80 of mass outside the table.
    const double R = 14.0 / std::sqrt(drift.lambda);
    lo_ = mode - R;
    hi_ = mode + R;
    const std::size_t n = 4096;
    h_ = (hi_ - lo_) / static_cast<double>(n);

    A_.resize(n + 1);
    a_.resize(n + 1);
    cum_.resize(n + 1);
    pdf_.resize(n + 1);

    using gauss7 = boost::math::quadrature::gauss<double, 7>;
    if (drift.antiderivative) {
        for (std::size_t i = 0; i <= n; ++i) {
            const double x = lo_ + h_ * static_cast<double>(i);
            A_[i] = drift.antiderivative(x);
            a_[i] = a(x);
        }
    } else {
        // Numeric A: accumulate int a over the table intervals.
        A_[0] = 0.0;
        a_[0] = a(lo_);
        for (std::size_t i = 1; i <= n; ++i) {
            const double x0 = lo_ + h_ * static_cast<double>(i - 1);
            const double x1 = x0 + h_;
            A_[i] = A_[i - 1] + gauss7::integrate(a, x0, x1);
            a_[i] = a(x1);
        }
    }
    double A_max = A_[0];
    for (double v : A_) A_max = std::max(A_max, v);
    for (double& v : A_) v -= A_max; // exp-shift; constants cancel in C

    // Per-interval masses of exp(2A) with A interpolated from exact slope
    // data (Hermite), then the normalizer and nodewise CDF/pdf.
    using gauss15 = boost::math::quadrature::gauss<double, 15>;
    double total = 0.0;
    cum_[0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        const double x0 = lo_ + h_ * static_cast<double>(i - 1);
        const double x1 = x0 + h_;
        total += gauss15::integrate(
            [this](double x) { return std::exp(2.0 * interp_A(x)); }, x0, x1);
        cum_[i] = total;
    }
    if (!(total > 0.0) || !std::isfinite(total))
        bad_arg("StationaryLaw", "normalizer quadrature failed to converge");
    norm_ = 1.0 / total;
    for (std::size_t i = 0; i <= n; ++i) {
        pdf_[i] = std::exp(2.0 * A_[i]) * norm_;
        cum_[i] *= norm_;
    }
}

namespace {
double hermite(double x0, double h, double f0, double f1, double d0, double d1,
               double x) {
    const double u = (x - x0) / h;
    const double u2 = u * u, u3 = u2 * u;
    return f0 * (2.0 * u3 - 3.0 * u2 + 1.0) + h * d0 * (u3 - 2.0 * u2 + u) +
           f1 * (-2.0 * u3 + 3.0 * u2) + h * d1 * (u3 - u2);
}
} // namespace

double StationaryLaw::interp_A(double x) const {
    const std::size_t n = A_.size() - 1;
    double u = (x - lo_) / h_;
    std::size_t i = u <= 0.0 ? 0 : std::min(n - 1, static_cast<std::size_t>(u));
    const double x0 = lo_ + h_ * static_cast<double>(i);
    return hermite(x0, h_, A_[i], A_[i + 1], a_[i], a_[i + 1], x);
}

double StationaryLaw::pdf(double x) const {
    if (x <= lo_ || x >= hi_) return 0.0; // < 1e-80 of mass lives out here
    return std::exp(2.0 * interp_A(x)) * norm_;
}

double StationaryLaw::cdf(double x) const {
    if (x <= lo_) return 0.0;
    if (x >= hi_) return 1.0;
    const std::size_t n = cum_.size() - 1;
    const double u = (x - lo_) / h_;
    const std::size_t i = std::min(n - 1, static_cast<std::size_t>(u));
    const double x0 = lo_ + h_ * static_cast<double>(i);
    const double v = hermite(x0, h_, cum_[i], cum_[i + 1], pdf_[i], pdf_[i + 1], x);
    return std::min(1.0, std::max(0.0, v));
}

double StationaryLaw::theta(double y1, double y2) const {
    if (!(y1 < y2)) bad_arg("theta", "requires y1 < y2");
    // Gaps below a few table cells go through a direct quadrature of pdf:
    // the CDF difference would cancel catastrophically for gap -> 0.
    if (y2 - y1 < 4.0 * h_ && y1 > lo_ && y2 < hi_) {
        using gauss15 = boost::math::quadrature::gauss<double, 15>;
        return gauss15::integrate([this](double x) { return pdf(x); }, y1, y2);
    }
    return cdf(y2) - cdf(y1);
}

double stationary_density(const DriftSpec& drift, double x) {
    return drift.law().pdf(x);
}

double theta(const DriftSpec& drift, double y1, double y2) {
    return drift.law().theta(y1, y2);
}

DriftConstants estimate_drift_constants(const std::function<double(double)>& a,
                                        double lo, double hi, std::size_t n) {
    if (!a) bad_arg("estimate_drift_constants", "no drift function");
    if (!(lo < hi) || n < 2) bad_arg("estimate_drift_constants", "bad range");
    const double h = (hi - lo) / static_cast<double>(n);
    double max_slope = -std::numeric_limits<double>::infinity();
    double max_abs = 0.0;
    double prev = a(lo);
    for (std::size_t i = 1; i <= n; ++i) {
        const double cur = a(lo + h * static_cast<double>(i));
        const double slope = (cur - prev) / h;
        max_slope = std::max(max_slope, slope);
        max_abs = std::max(max_abs, std::abs(slope));
        prev = cur;
    }
    return {max_abs, -max_slope};
}

} // namespace condbm
