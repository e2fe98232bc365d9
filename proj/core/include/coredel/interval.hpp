#pragma once

#include "coredel/ast.hpp"
#include "coredel/errors.hpp"

namespace coredel {

// Closed interval with outward-rounded arithmetic: every operation widens its
// result by one ulp per endpoint, so the returned interval always contains
// the exact image.
struct Interval {
    double lo = 0, hi = 0;

    Interval() = default;
    Interval(double l, double h) : lo(l), hi(h) {}
    static Interval point(double v) { return {v, v}; }
    static Interval whole();

    bool contains_zero() const { return lo <= 0 && 0 <= hi; }
    bool contains(double v) const { return lo <= v && v <= hi; }
    // minimum absolute value; 0 when the interval straddles zero
    double mignitude() const;
    std::string str() const;
};

Interval iv_add(Interval a, Interval b);
Interval iv_sub(Interval a, Interval b);
Interval iv_mul(Interval a, Interval b);
Interval iv_div(Interval a, Interval b); // unbounded when 0 is inside b
Interval iv_neg(Interval a);
Interval iv_pow(Interval a, long long n); // n >= 0, even powers stay nonnegative
Interval iv_sin(Interval a);
Interval iv_cos(Interval a);

// Variable ranges for pivot certification; unlisted variables fall back to
// [-1e6, 1e6].
struct Box {
    std::map<Variable, Interval> ranges;
    Interval lookup(const Variable& x) const;
};

// Ranges file: lines of `variable lo hi`, `#` comments. Throws CdlError.
Box parse_ranges(const std::string& text, const std::string& filename = "<ranges>");

// Standard interval extension of an arithmetic expression. Boolean operators,
// vectors and residual derivative forms have no interval reading and throw.
Interval interval_eval(const ExprPtr& e, const Box& box);

} // namespace coredel
