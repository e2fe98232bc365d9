#include "coredel/interval.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace coredel {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double down(double v) { return std::isfinite(v) ? std::nextafter(v, -kInf) : v; }
double up(double v) { return std::isfinite(v) ? std::nextafter(v, kInf) : v; }

Interval widen(Interval a) { return {down(a.lo), up(a.hi)}; }

// product with 0 * inf treated as 0, which is the conservative convention for
// interval endpoints
double prod(double a, double b) {
    if (a == 0 || b == 0) return 0;
    return a * b;
}

} // namespace

Interval Interval::whole() { return {-kInf, kInf}; }

double Interval::mignitude() const {
    if (contains_zero()) return 0;
    return std::min(std::fabs(lo), std::fabs(hi));
}

std::string Interval::str() const {
    std::ostringstream os;
    os << "[" << lo << ", " << hi << "]";
    return os.str();
}

Interval iv_add(Interval a, Interval b) { return widen({a.lo + b.lo, a.hi + b.hi}); }
Interval iv_sub(Interval a, Interval b) { return widen({a.lo - b.hi, a.hi - b.lo}); }

Interval iv_mul(Interval a, Interval b) {
    double c[4] = {prod(a.lo, b.lo), prod(a.lo, b.hi), prod(a.hi, b.lo), prod(a.hi, b.hi)};
    double lo = c[0], hi = c[0];
    for (double v : c) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return widen({lo, hi});
}

Interval iv_div(Interval a, Interval b) {
    if (b.contains_zero()) return Interval::whole();
    double c[4] = {a.lo / b.lo, a.lo / b.hi, a.hi / b.lo, a.hi / b.hi};
    double lo = c[0], hi = c[0];
    for (double v : c) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return widen({lo, hi});
}

Interval iv_neg(Interval a) { return {-a.hi, -a.lo}; }

Interval iv_pow(Interval a, long long n) {
    if (n == 0) return {1, 1};
    if (n == 1) return a;
    auto p = [n](double v) { return std::pow(v, static_cast<double>(n)); };
    if (n % 2 == 0) {
        double alo = std::fabs(a.lo), ahi = std::fabs(a.hi);
        double big = std::max(alo, ahi);
        double small = a.contains_zero() ? 0.0 : std::min(alo, ahi);
        return widen({small == 0 ? 0.0 : p(small), p(big)});
    }
    return widen({p(a.lo), p(a.hi)});
}

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// enclosure of sin over [a.lo, a.hi]
Interval sin_enclosure(Interval a) {
    if (!std::isfinite(a.lo) || !std::isfinite(a.hi) || a.hi - a.lo >= kTwoPi) return {-1, 1};
    double slo = std::sin(a.lo), shi = std::sin(a.hi);
    double lo = std::min(slo, shi), hi = std::max(slo, shi);
    // does the interval contain a maximum point pi/2 + 2k pi?
    double kmax = std::floor((a.hi - M_PI / 2) / kTwoPi);
    if (M_PI / 2 + kmax * kTwoPi >= a.lo) hi = 1;
    // ... or a minimum point -pi/2 + 2k pi?
    double kmin = std::floor((a.hi + M_PI / 2) / kTwoPi);
    if (-M_PI / 2 + kmin * kTwoPi >= a.lo) lo = -1;
    Interval r = widen({lo, hi});
    r.lo = std::max(r.lo, -1.0);
    r.hi = std::min(r.hi, 1.0);
    return r;
}

} // namespace

Interval iv_sin(Interval a) { return sin_enclosure(a); }

Interval iv_cos(Interval a) {
    // cos x = sin(x + pi/2); shift with outward rounding
    Interval shifted = iv_add(a, {down(M_PI / 2), up(M_PI / 2)});
    return sin_enclosure(shifted);
}

Interval Box::lookup(const Variable& x) const {
    auto it = ranges.find(x);
    if (it != ranges.end()) return it->second;
    return {-1e6, 1e6};
}

Box parse_ranges(const std::string& text, const std::string& filename) {
    Box box;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ls(line);
        std::string name;
        double lo, hi;
        if (!(ls >> name)) continue; // blank
        if (!(ls >> lo >> hi))
            throw CdlError("RangesFormat",
                           filename + ": line " + std::to_string(lineno) +
                               ": expected `variable lo hi`",
                           {lineno, 1, lineno, 1});
        int primes = 0;
        while (!name.empty() && name.back() == '\'') {
            name.pop_back();
            ++primes;
        }
        if (lo > hi)
            throw CdlError("RangesFormat",
                           filename + ": line " + std::to_string(lineno) + ": lo > hi",
                           {lineno, 1, lineno, 1});
        box.ranges[Variable(name, primes)] = {lo, hi};
    }
    return box;
}

Interval interval_eval(const ExprPtr& e, const Box& box) {
    switch (e->kind) {
        case ExprKind::Const:
            switch (e->lit.kind) {
                case Constant::Kind::Nat:
                case Constant::Kind::Real: {
                    double v = e->lit.value.to_double();
                    return {down(v), up(v)};
                }
                case Constant::Kind::Pi: return {down(M_PI), up(M_PI)};
                case Constant::Kind::Bool:
                    throw CdlError("IntervalDomain", "boolean constant in interval context", e->span);
            }
            break;
        case ExprKind::Var: return box.lookup(e->var);
        case ExprKind::Apply: {
            const std::string& fn = e->fn;
            if (fn == "sin") return iv_sin(interval_eval(e->kids[0], box));
            if (fn == "cos") return iv_cos(interval_eval(e->kids[0], box));
            if (fn == "^") {
                const ExprPtr& exp = e->kids[1];
                if (exp->kind == ExprKind::Const && exp->lit.kind == Constant::Kind::Nat &&
                    exp->lit.value.num().fits_longlong())
                    return iv_pow(interval_eval(e->kids[0], box), exp->lit.value.num().to_longlong());
                throw CdlError("IntervalDomain", "'^' needs a natural literal exponent", e->span);
            }
            if (fn == "+") return iv_add(interval_eval(e->kids[0], box), interval_eval(e->kids[1], box));
            if (fn == "-") return iv_sub(interval_eval(e->kids[0], box), interval_eval(e->kids[1], box));
            if (fn == "*") return iv_mul(interval_eval(e->kids[0], box), interval_eval(e->kids[1], box));
            if (fn == "/") return iv_div(interval_eval(e->kids[0], box), interval_eval(e->kids[1], box));
            throw CdlError("IntervalDomain", "'" + fn + "' has no interval extension", e->span);
        }
        default: break;
    }
    throw CdlError("IntervalDomain", "expression has no interval reading", e->span);
}

} // namespace coredel
