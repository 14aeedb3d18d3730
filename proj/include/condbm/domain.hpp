#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

namespace condbm {

// The open set G. Only shapes with closed-form exit probabilities are
// supported: half-lines, bounded intervals, half-spaces, finite products of
// 1D factors, and the planar wedge {y1 < y2}.

struct HalfLine {
    double origin = 0.0;
    int direction = +1; // +1: G = (origin, +inf); -1: G = (-inf, origin)
};

struct Interval {
    double a;
    double b; // G = (a, b), requires a < b
};

struct HalfSpace {
    std::vector<double> anchor;
    std::vector<double> normal; // unit vector pointing into G
};

using Factor1d = std::variant<HalfLine, Interval>;

struct Box {
    std::vector<Factor1d> factors; // G = product of 1D factors
};

struct Wedge2 {}; // G = {y in R^2 : y1 < y2}

class DomainSpec {
public:
    using Shape = std::variant<HalfLine, Interval, HalfSpace, Box, Wedge2>;

    DomainSpec(HalfLine h) : shape_(h) { validate(); }
    DomainSpec(Interval i) : shape_(i) { validate(); }
    DomainSpec(HalfSpace h) : shape_(std::move(h)) { validate(); }
    DomainSpec(Box b) : shape_(std::move(b)) { validate(); }
    DomainSpec(Wedge2 w) : shape_(w) { validate(); }

    const Shape& shape() const { return shape_; }

    std::size_t dim() const;

    // Strict interior membership of the open set.
    bool membership(std::span<const double> y) const;

    // Distance to the boundary, clamped to 0 outside the interior, so that
    // boundary_distance(y) > 0 <=> membership(y).
    double boundary_distance(std::span<const double> y) const;

    // Membership of the closure; first_exit_time only counts points strictly
    // outside the closed set.
    bool in_closure(std::span<const double> y) const;

    // 1-point convenience overloads for the 1D shapes.
    bool membership(double y) const { return membership(std::span<const double>(&y, 1)); }
    double boundary_distance(double y) const {
        return boundary_distance(std::span<const double>(&y, 1));
    }

private:
    void validate() const;
    Shape shape_;
};

} // namespace condbm
