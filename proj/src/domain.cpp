#include "condbm/domain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace condbm {

namespace {

[[noreturn]] void bad(const char* what) {
    throw std::invalid_argument(std::string("DomainSpec: ") + what);
}

double factor_distance(const Factor1d& f, double y) {
    if (const auto* h = std::get_if<HalfLine>(&f)) return h->direction * (y - h->origin);
    const auto& iv = std::get<Interval>(f);
    return std::min(y - iv.a, iv.b - y);
}

} // namespace

void DomainSpec::validate() const {
    std::visit(
        [](const auto& shape) {
            using S = std::decay_t<decltype(shape)>;
            if constexpr (std::is_same_v<S, HalfLine>) {
                if (shape.direction != 1 && shape.direction != -1)
                    bad("half-line direction must be +1 or -1");
                if (!std::isfinite(shape.origin)) bad("half-line origin must be finite");
            } else if constexpr (std::is_same_v<S, Interval>) {
                if (!(shape.a < shape.b)) bad("interval requires a < b");
                if (!std::isfinite(shape.a) || !std::isfinite(shape.b))
                    bad("interval endpoints must be finite");
            } else if constexpr (std::is_same_v<S, HalfSpace>) {
                if (shape.anchor.empty() || shape.anchor.size() != shape.normal.size())
                    bad("half-space anchor/normal must be nonempty and equal-length");
                double n2 = 0.0;
                for (double c : shape.normal) {
                    if (!std::isfinite(c)) bad("half-space normal must be finite");
                    n2 += c * c;
                }
                if (std::abs(n2 - 1.0) > 1e-9) bad("half-space normal must be a unit vector");
            } else if constexpr (std::is_same_v<S, Box>) {
                if (shape.factors.empty()) bad("box requires at least one factor");
                for (const auto& f : shape.factors)
                    if (const auto* iv = std::get_if<Interval>(&f); iv && !(iv->a < iv->b))
                        bad("box interval factor requires a < b");
            }
            // Wedge2 has no parameters.
        },
        shape_);
}

std::size_t DomainSpec::dim() const {
    return std::visit(
        [](const auto& shape) -> std::size_t {
            using S = std::decay_t<decltype(shape)>;
            if constexpr (std::is_same_v<S, HalfSpace>) return shape.anchor.size();
            else if constexpr (std::is_same_v<S, Box>) return shape.factors.size();
            else if constexpr (std::is_same_v<S, Wedge2>) return 2;
            else return 1;
        },
        shape_);
}

bool DomainSpec::membership(std::span<const double> y) const {
    return boundary_distance(y) > 0.0;
}

double DomainSpec::boundary_distance(std::span<const double> y) const {
    if (y.size() != dim())
        throw std::invalid_argument("DomainSpec: dimension mismatch");
    const double d = std::visit(
        [&](const auto& shape) -> double {
            using S = std::decay_t<decltype(shape)>;
            if constexpr (std::is_same_v<S, HalfLine>) {
                return shape.direction * (y[0] - shape.origin);
            } else if constexpr (std::is_same_v<S, Interval>) {
                return std::min(y[0] - shape.a, shape.b - y[0]);
            } else if constexpr (std::is_same_v<S, HalfSpace>) {
                double s = 0.0;
                for (std::size_t j = 0; j < y.size(); ++j)
                    s += (y[j] - shape.anchor[j]) * shape.normal[j];
                return s;
            } else if constexpr (std::is_same_v<S, Box>) {
                double m = std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j < shape.factors.size(); ++j)
                    m = std::min(m, factor_distance(shape.factors[j], y[j]));
                return m;
            } else { // Wedge2: Euclidean distance to the diagonal
                return (y[1] - y[0]) / std::sqrt(2.0);
            }
        },
        shape_);
    return std::max(d, 0.0);
}

bool DomainSpec::in_closure(std::span<const double> y) const {
    if (y.size() != dim())
        throw std::invalid_argument("DomainSpec: dimension mismatch");
    return std::visit(
        [&](const auto& shape) -> bool {
            using S = std::decay_t<decltype(shape)>;
            if constexpr (std::is_same_v<S, HalfLine>) {
                return shape.direction * (y[0] - shape.origin) >= 0.0;
            } else if constexpr (std::is_same_v<S, Interval>) {
                return y[0] >= shape.a && y[0] <= shape.b;
            } else if constexpr (std::is_same_v<S, HalfSpace>) {
                double s = 0.0;
                for (std::size_t j = 0; j < y.size(); ++j)
                    s += (y[j] - shape.anchor[j]) * shape.normal[j];
                return s >= 0.0;
            } else if constexpr (std::is_same_v<S, Box>) {
                for (std::size_t j = 0; j < shape.factors.size(); ++j)
                    if (factor_distance(shape.factors[j], y[j]) < 0.0) return false;
                return true;
            } else {
                return y[0] <= y[1];
            }
        },
        shape_);
}

} // namespace condbm
