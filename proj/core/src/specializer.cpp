#include "coredel/specializer.hpp"

#include <algorithm>
#include <functional>


namespace coredel {

std::string spec_error_kind_name(SpecErrorKind k) {
    switch (k) {
        case SpecErrorKind::IndexOutOfBounds: return "IndexOutOfBounds";
        case SpecErrorKind::NonVariablePartialTarget: return "NonVariablePartialTarget";
        case SpecErrorKind::StaticCycle: return "StaticCycle";
        case SpecErrorKind::ArityError: return "ArityError";
        case SpecErrorKind::DivisionByZero: return "DivisionByZero";
        case SpecErrorKind::NonDifferentiable: return "NonDifferentiable";
    }
    return "SpecError";
}

// ---------------------------------------------------------------------------
// Values

ExprPtr value_to_expr(const Value& v) {
    switch (v.kind) {
        case Value::Kind::Const: {
            auto e = std::make_shared<Expr>();
            e->kind = ExprKind::Const;
            e->lit = v.c;
            e->bt = v.bt;
            return e;
        }
        case Value::Kind::Residual: return v.residual;
        case Value::Kind::Vector: {
            std::vector<ExprPtr> kids;
            kids.reserve(v.elems.size());
            for (const Value& e : v.elems) kids.push_back(value_to_expr(e));
            auto e = std::make_shared<Expr>();
            e->kind = ExprKind::VectorLit;
            e->kids = std::move(kids);
            e->bt = v.bt;
            return e;
        }
    }
    return nullptr;
}

// ---------------------------------------------------------------------------
// Static application

namespace {

Rational const_num(const Constant& c) { return c.value; }

Constant num_result(const Rational& r, bool both_nat) {
    if (both_nat && r.is_integer() && !r.is_negative()) return Constant::nat(r);
    return Constant::real(r);
}

} // namespace

StaticApplyResult static_apply(const std::string& fn, const std::vector<Constant>& args,
                               SourceSpan span) {
    const BuiltinInfo* info = builtin_info(fn);
    if (!info) throw SpecError(SpecErrorKind::ArityError, "unknown function '" + fn + "'", span);
    if (info->arity >= 0 && static_cast<int>(args.size()) != info->arity)
        throw SpecError(SpecErrorKind::ArityError, "'" + fn + "' arity mismatch", span);

    // anything touching pi stays symbolic
    for (const Constant& a : args)
        if (a.kind == Constant::Kind::Pi && fn != "==" && fn != "!=") return {false, {}};

    if (fn == "sin" || fn == "cos") {
        const Constant& a = args[0];
        if (a.is_numeric() && a.value.is_zero())
            return {true, Constant::real(Rational(fn == "sin" ? 0 : 1))};
        return {false, {}}; // irrational in general: leave for simulation time
    }

    auto need_numeric = [&](const Constant& a) {
        if (!a.is_numeric())
            throw SpecError(SpecErrorKind::ArityError, "'" + fn + "' expects numeric arguments",
                            span);
    };

    if (fn == "+" || fn == "-" || fn == "*" || fn == "/") {
        need_numeric(args[0]);
        need_numeric(args[1]);
        bool both_nat = args[0].kind == Constant::Kind::Nat && args[1].kind == Constant::Kind::Nat;
        const Rational &a = const_num(args[0]), &b = const_num(args[1]);
        if (fn == "+") return {true, num_result(a + b, both_nat)};
        if (fn == "-") return {true, num_result(a - b, both_nat)};
        if (fn == "*") return {true, num_result(a * b, both_nat)};
        if (b.is_zero()) throw SpecError(SpecErrorKind::DivisionByZero, "division by zero", span);
        return {true, Constant::real(a / b)};
    }
    if (fn == "^") {
        need_numeric(args[0]);
        if (args[1].kind != Constant::Kind::Nat)
            throw SpecError(SpecErrorKind::ArityError, "'^' needs a natural exponent", span);
        if (!args[1].value.num().fits_longlong() || args[1].value.num().to_longlong() > (1 << 20))
            throw SpecError(SpecErrorKind::ArityError, "'^' exponent too large", span);
        unsigned long long e = static_cast<unsigned long long>(args[1].value.num().to_longlong());
        bool nat = args[0].kind == Constant::Kind::Nat;
        return {true, num_result(const_num(args[0]).pow(e), nat)};
    }
    if (fn == "&&" || fn == "||") {
        for (const Constant& a : args)
            if (a.kind != Constant::Kind::Bool)
                throw SpecError(SpecErrorKind::ArityError, "'" + fn + "' expects booleans", span);
        bool r = fn == "&&" ? (args[0].bval && args[1].bval) : (args[0].bval || args[1].bval);
        return {true, Constant::boolean(r)};
    }
    if (fn == ">" || fn == ">=") {
        need_numeric(args[0]);
        need_numeric(args[1]);
        int c = Rational::cmp(const_num(args[0]), const_num(args[1]));
        return {true, Constant::boolean(fn == ">" ? c > 0 : c >= 0)};
    }
    if (fn == "==" || fn == "!=") {
        bool eq;
        if (args[0].is_numeric() && args[1].is_numeric())
            eq = const_num(args[0]) == const_num(args[1]);
        else if (args[0].kind == Constant::Kind::Bool && args[1].kind == Constant::Kind::Bool)
            eq = args[0].bval == args[1].bval;
        else if (args[0].kind == Constant::Kind::Pi && args[1].kind == Constant::Kind::Pi)
            eq = true;
        else if (args[0].kind == Constant::Kind::Pi || args[1].kind == Constant::Kind::Pi)
            return {false, {}}; // pi vs rational: leave symbolic
        else
            throw SpecError(SpecErrorKind::ArityError, "'" + fn + "' on mixed kinds", span);
        return {true, Constant::boolean(fn == "==" ? eq : !eq)};
    }
    throw SpecError(SpecErrorKind::ArityError, "'" + fn + "' is not a scalar builtin", span);
}

// ---------------------------------------------------------------------------
// Simplification: canonical sum of monomials

namespace {

struct Monomial {
    // sorted by cmp_expr, powers >= 1
    std::vector<std::pair<ExprPtr, int>> factors;

    bool operator<(const Monomial& o) const {
        size_t n = std::min(factors.size(), o.factors.size());
        for (size_t i = 0; i < n; ++i) {
            if (int c = cmp_expr(factors[i].first, o.factors[i].first)) return c < 0;
            if (factors[i].second != o.factors[i].second)
                return factors[i].second < o.factors[i].second;
        }
        return factors.size() < o.factors.size();
    }
};

using Poly = std::map<Monomial, Rational>;

void poly_add_term(Poly& p, const Monomial& m, const Rational& c) {
    if (c.is_zero()) return;
    auto [it, fresh] = p.emplace(m, c);
    if (!fresh) {
        it->second = it->second + c;
        if (it->second.is_zero()) p.erase(it);
    }
}

Poly poly_add(const Poly& a, const Poly& b) {
    Poly r = a;
    for (const auto& [m, c] : b) poly_add_term(r, m, c);
    return r;
}

Poly poly_scale(const Poly& a, const Rational& k) {
    Poly r;
    if (k.is_zero()) return r;
    for (const auto& [m, c] : a) r.emplace(m, c * k);
    return r;
}

Monomial mono_mul(const Monomial& a, const Monomial& b) {
    Monomial r;
    size_t i = 0, j = 0;
    while (i < a.factors.size() || j < b.factors.size()) {
        if (j == b.factors.size()) {
            r.factors.push_back(a.factors[i++]);
        } else if (i == a.factors.size()) {
            r.factors.push_back(b.factors[j++]);
        } else {
            int c = cmp_expr(a.factors[i].first, b.factors[j].first);
            if (c < 0)
                r.factors.push_back(a.factors[i++]);
            else if (c > 0)
                r.factors.push_back(b.factors[j++]);
            else {
                r.factors.push_back({a.factors[i].first, a.factors[i].second + b.factors[j].second});
                ++i;
                ++j;
            }
        }
    }
    return r;
}

Poly poly_mul(const Poly& a, const Poly& b) {
    Poly r;
    for (const auto& [ma, ca] : a)
        for (const auto& [mb, cb] : b) poly_add_term(r, mono_mul(ma, mb), ca * cb);
    return r;
}

Poly poly_const(const Rational& c) {
    Poly p;
    if (!c.is_zero()) p.emplace(Monomial{}, c);
    return p;
}

Poly poly_atom(ExprPtr atom, int power = 1) {
    Poly p;
    Monomial m;
    m.factors.push_back({std::move(atom), power});
    p.emplace(std::move(m), Rational(1));
    return p;
}

bool poly_is_const(const Poly& p, Rational& out) {
    if (p.empty()) {
        out = Rational(0);
        return true;
    }
    if (p.size() == 1 && p.begin()->first.factors.empty()) {
        out = p.begin()->second;
        return true;
    }
    return false;
}

ExprPtr from_poly(const Poly& p);
Poly to_poly(const ExprPtr& e);

// Rewrite sin(u)^2 to 1 - cos(u)^2 everywhere. Squares of sines never
// survive, so Pythagorean pairs cancel exactly through coefficient
// combination; interval evaluation of mass-matrix pivots depends on it.
Poly poly_finalize(Poly p) {
    for (;;) {
        bool changed = false;
        Poly next;
        for (const auto& [m, c] : p) {
            size_t idx = m.factors.size();
            for (size_t i = 0; i < m.factors.size(); ++i)
                if (m.factors[i].second >= 2 && m.factors[i].first->kind == ExprKind::Apply &&
                    m.factors[i].first->fn == "sin") {
                    idx = i;
                    break;
                }
            if (idx == m.factors.size()) {
                poly_add_term(next, m, c);
                continue;
            }
            changed = true;
            Monomial rest = m;
            ExprPtr u = rest.factors[idx].first->kids[0];
            if (rest.factors[idx].second == 2)
                rest.factors.erase(rest.factors.begin() + static_cast<long>(idx));
            else
                rest.factors[idx].second -= 2;
            Poly rest_poly;
            rest_poly.emplace(rest, c);
            Poly pythagoras = poly_add(
                poly_const(Rational(1)),
                poly_scale(poly_atom(mk_apply("cos", {u}), 2), Rational(-1)));
            for (const auto& [m2, c2] : poly_mul(rest_poly, pythagoras))
                poly_add_term(next, m2, c2);
        }
        p = std::move(next);
        if (!changed) return p;
    }
}

ExprPtr simplified(const ExprPtr& e); // full simplify, handles non-arithmetic nodes

// rebuild a non-arithmetic node with simplified children, folding constant
// comparisons and logical connectives
ExprPtr simplify_opaque(const ExprPtr& e) {
    if (e->kind == ExprKind::Const || e->kind == ExprKind::Var) return e;
    auto n = std::make_shared<Expr>(*e);
    for (auto& k : n->kids) k = simplified(k);
    if (n->kind == ExprKind::Apply) {
        const BuiltinInfo* info = builtin_info(n->fn);
        if (info && (info->comparison || info->logical)) {
            bool all_const = true;
            std::vector<Constant> cs;
            for (const auto& k : n->kids) {
                if (k->kind == ExprKind::Const)
                    cs.push_back(k->lit);
                else
                    all_const = false;
            }
            if (all_const) {
                try {
                    StaticApplyResult r = static_apply(n->fn, cs, n->span);
                    if (r.folded) return mk_const(r.value, n->span);
                } catch (const SpecError&) {
                    // leave as-is; runtime evaluation reports it
                }
            }
        }
    }
    return n;
}

// maximum natural exponent that gets expanded during canonicalization
constexpr long long kExpandPowLimit = 6;

Poly to_poly(const ExprPtr& e) {
    switch (e->kind) {
        case ExprKind::Const:
            if (e->lit.is_numeric()) return poly_const(e->lit.value);
            if (e->lit.kind == Constant::Kind::Pi) return poly_atom(e);
            return poly_atom(e); // booleans should not appear in arithmetic
        case ExprKind::Var: return poly_atom(e);
        case ExprKind::Apply: {
            const std::string& fn = e->fn;
            if (fn == "+") return poly_add(to_poly(e->kids[0]), to_poly(e->kids[1]));
            if (fn == "-")
                return poly_add(to_poly(e->kids[0]), poly_scale(to_poly(e->kids[1]), Rational(-1)));
            if (fn == "*") return poly_mul(to_poly(e->kids[0]), to_poly(e->kids[1]));
            if (fn == "/") {
                Poly num = to_poly(e->kids[0]);
                Poly den = to_poly(e->kids[1]);
                Rational dc;
                if (poly_is_const(den, dc) && !dc.is_zero())
                    return poly_scale(num, Rational(1) / dc);
                Rational nc;
                if (poly_is_const(num, nc) && nc.is_zero()) return Poly{};
                ExprPtr atom = mk_apply("/", {from_poly(poly_finalize(num)), from_poly(poly_finalize(den))}, e->span);
                return poly_atom(atom);
            }
            if (fn == "^") {
                const ExprPtr& exp = e->kids[1];
                if (exp->kind == ExprKind::Const && exp->lit.kind == Constant::Kind::Nat &&
                    exp->lit.value.num().fits_longlong()) {
                    long long k = exp->lit.value.num().to_longlong();
                    if (k == 0) return poly_const(Rational(1));
                    Poly base = to_poly(e->kids[0]);
                    Rational bc;
                    if (poly_is_const(base, bc))
                        return poly_const(bc.pow(static_cast<unsigned long long>(k)));
                    if (k <= kExpandPowLimit) {
                        Poly acc = base;
                        for (long long i = 1; i < k; ++i) acc = poly_mul(acc, base);
                        return acc;
                    }
                    // keep large powers as a single factor
                    ExprPtr batom = from_poly(poly_finalize(base));
                    return poly_atom(batom, static_cast<int>(k));
                }
                break; // dynamic exponent: opaque
            }
            break; // sin, cos, comparisons, matrix forms: opaque
        }
        default: break;
    }
    return poly_atom(simplify_opaque(e));
}

ExprPtr factor_expr(const ExprPtr& atom, int power) {
    if (power == 1) return atom;
    return mk_apply("^", {atom, mk_const(Constant::nat(Rational(power)))});
}

ExprPtr term_expr(const Monomial& m, const Rational& coeff_abs) {
    ExprPtr prod;
    if (!(coeff_abs == Rational(1)) || m.factors.empty()) {
        Rational c = coeff_abs;
        prod = mk_const(c.is_integer() && !c.is_negative() ? Constant::nat(c) : Constant::real(c));
    }
    for (const auto& [atom, power] : m.factors) {
        ExprPtr f = factor_expr(atom, power);
        prod = prod ? mk_apply("*", {prod, f}) : f;
    }
    return prod;
}

ExprPtr from_poly(const Poly& p) {
    if (p.empty()) return mk_const(Constant::nat(Rational(0)));
    ExprPtr sum;
    for (const auto& [m, c] : p) {
        bool neg = c.is_negative();
        if (!sum) {
            if (!neg) {
                sum = term_expr(m, c);
            } else if (m.factors.empty()) {
                sum = mk_const(Constant::real(c)); // plain negative constant
            } else {
                sum = mk_apply("*", {mk_const(Constant::real(Rational(-1))), term_expr(m, -c)});
            }
        } else {
            sum = mk_apply(neg ? "-" : "+", {sum, term_expr(m, neg ? -c : c)});
        }
    }
    return sum;
}

ExprPtr simplified(const ExprPtr& e) {
    switch (e->kind) {
        case ExprKind::Const:
        case ExprKind::Var: return e;
        case ExprKind::Apply: {
            const BuiltinInfo* info = builtin_info(e->fn);
            if (info && info->arithmetic) return from_poly(poly_finalize(to_poly(e)));
            return simplify_opaque(e);
        }
        default: return simplify_opaque(e);
    }
}

} // namespace

ExprPtr simplify(const ExprPtr& e) { return simplified(e); }

// ---------------------------------------------------------------------------
// Differentiation

namespace {

ExprPtr d_zero() { return mk_const(Constant::nat(Rational(0))); }
ExprPtr d_one() { return mk_const(Constant::nat(Rational(1))); }

using DeriveLeaf = std::function<ExprPtr(const ExprPtr&)>;

// chain-rule core shared by total and partial differentiation; `leaf`
// supplies d(variable)
ExprPtr derive(const ExprPtr& e, const DeriveLeaf& leaf) {
    switch (e->kind) {
        case ExprKind::Const: return d_zero();
        case ExprKind::Var: return leaf(e);
        case ExprKind::Apply: {
            const std::string& fn = e->fn;
            const auto& k = e->kids;
            if (fn == "+") return mk_apply("+", {derive(k[0], leaf), derive(k[1], leaf)});
            if (fn == "-") return mk_apply("-", {derive(k[0], leaf), derive(k[1], leaf)});
            if (fn == "*")
                return mk_apply("+", {mk_apply("*", {derive(k[0], leaf), k[1]}),
                                      mk_apply("*", {k[0], derive(k[1], leaf)})});
            if (fn == "/")
                return mk_apply(
                    "/", {mk_apply("-", {mk_apply("*", {derive(k[0], leaf), k[1]}),
                                         mk_apply("*", {k[0], derive(k[1], leaf)})}),
                          mk_apply("^", {k[1], mk_const(Constant::nat(Rational(2)))})});
            if (fn == "^") {
                if (k[1]->kind != ExprKind::Const || k[1]->lit.kind != Constant::Kind::Nat)
                    throw SpecError(SpecErrorKind::NonDifferentiable,
                                    "'^' needs a static natural exponent to differentiate",
                                    e->span);
                Rational n = k[1]->lit.value;
                if (n.is_zero()) return d_zero();
                ExprPtr lower = mk_apply("^", {k[0], mk_const(Constant::nat(n - Rational(1)))});
                return mk_apply("*",
                                {mk_apply("*", {mk_const(Constant::nat(n)), lower}),
                                 derive(k[0], leaf)});
            }
            if (fn == "sin") return mk_apply("*", {mk_apply("cos", {k[0]}), derive(k[0], leaf)});
            if (fn == "cos")
                return mk_apply("*", {mk_apply("*", {mk_const(Constant::real(Rational(-1))),
                                                     mk_apply("sin", {k[0]})}),
                                      derive(k[0], leaf)});
            throw SpecError(SpecErrorKind::NonDifferentiable,
                            "'" + fn + "' has no derivative rule", e->span);
        }
        default:
            throw SpecError(SpecErrorKind::NonDifferentiable,
                            "cannot differentiate this residual form", e->span);
    }
}

} // namespace

ExprPtr time_derivative(const ExprPtr& e) {
    ExprPtr d = derive(e, [](const ExprPtr& v) { return mk_var(v->var.derived(), v->span); });
    return simplify(d);
}

ExprPtr partial_derivative(const ExprPtr& e, const Variable& x) {
    ExprPtr d = derive(e, [&](const ExprPtr& v) { return v->var == x ? d_one() : d_zero(); });
    return simplify(d);
}

// ---------------------------------------------------------------------------
// Expression specialization

namespace {

BT node_bt(const ExprPtr& e) {
    if (e->bt) return *e->bt;
    // substituted value expressions carry no annotations: constants are
    // static, everything else is residual
    return e->kind == ExprKind::Const ? BT::S : BT::D;
}

Value residual_value(ExprPtr e) { return Value::of_residual(std::move(e)); }

Value shallow_value(const ExprPtr& e) {
    if (e->kind == ExprKind::Const) return Value::of_const(e->lit, node_bt(e));
    return residual_value(e);
}

// matrix helpers over values -------------------------------------------------

bool value_is_matrix(const Value& v, size_t& rows, size_t& cols) {
    if (v.kind != Value::Kind::Vector || v.elems.empty()) return false;
    if (v.elems[0].kind != Value::Kind::Vector) return false;
    cols = v.elems[0].elems.size();
    rows = v.elems.size();
    for (const Value& r : v.elems)
        if (r.kind != Value::Kind::Vector || r.elems.size() != cols) return false;
    return true;
}

bool value_is_flat_vector(const Value& v) {
    if (v.kind != Value::Kind::Vector) return false;
    for (const Value& e : v.elems)
        if (e.kind == Value::Kind::Vector) return false;
    return true;
}

ExprPtr ve(const Value& v) { return value_to_expr(v); }

Value scalar_of(ExprPtr e) { return shallow_value(simplify(std::move(e))); }

Value matmul(const Value& a, const Value& b, SourceSpan span) {
    size_t m, k, k2, n;
    if (!value_is_matrix(a, m, k))
        throw SpecError(SpecErrorKind::ArityError, "matrix product needs a matrix", span);
    auto dot = [&](size_t i, auto col) {
        ExprPtr acc;
        for (size_t l = 0; l < k; ++l) {
            ExprPtr t = mk_apply("*", {ve(a.elems[i].elems[l]), col(l)});
            acc = acc ? mk_apply("+", {acc, t}) : t;
        }
        return acc;
    };
    if (value_is_matrix(b, k2, n)) {
        if (k != k2) throw SpecError(SpecErrorKind::ArityError, "matrix shape mismatch", span);
        std::vector<Value> rows;
        for (size_t i = 0; i < m; ++i) {
            std::vector<Value> row;
            for (size_t j = 0; j < n; ++j)
                row.push_back(scalar_of(dot(i, [&](size_t l) { return ve(b.elems[l].elems[j]); })));
            rows.push_back(Value::of_vector(std::move(row)));
        }
        if (n == 1) {
            // a column collapses to a flat vector
            std::vector<Value> flat;
            for (Value& r : rows) flat.push_back(std::move(r.elems[0]));
            return Value::of_vector(std::move(flat));
        }
        return Value::of_vector(std::move(rows));
    }
    if (value_is_flat_vector(b)) {
        if (b.elems.size() != k)
            throw SpecError(SpecErrorKind::ArityError, "matrix shape mismatch", span);
        std::vector<Value> out;
        for (size_t i = 0; i < m; ++i)
            out.push_back(scalar_of(dot(i, [&](size_t l) { return ve(b.elems[l]); })));
        return Value::of_vector(std::move(out));
    }
    throw SpecError(SpecErrorKind::ArityError, "matrix product needs vector shapes", span);
}

Value transpose(const Value& v, SourceSpan span) {
    size_t m, n;
    if (value_is_matrix(v, m, n)) {
        std::vector<Value> rows;
        for (size_t j = 0; j < n; ++j) {
            std::vector<Value> row;
            for (size_t i = 0; i < m; ++i) row.push_back(v.elems[i].elems[j]);
            rows.push_back(Value::of_vector(std::move(row)));
        }
        return Value::of_vector(std::move(rows));
    }
    if (value_is_flat_vector(v)) {
        std::vector<Value> rows;
        for (const Value& e : v.elems) rows.push_back(Value::of_vector({e}));
        return Value::of_vector(std::move(rows));
    }
    throw SpecError(SpecErrorKind::ArityError, "'trans' needs a vector value", span);
}

Value inverse2x2(const Value& v, SourceSpan span) {
    size_t m, n;
    if (!value_is_matrix(v, m, n) || m != 2 || n != 2)
        throw SpecError(SpecErrorKind::ArityError, "'inv' supports 2 x 2 matrices only", span);
    ExprPtr a = ve(v.elems[0].elems[0]), b = ve(v.elems[0].elems[1]);
    ExprPtr c = ve(v.elems[1].elems[0]), d = ve(v.elems[1].elems[1]);
    ExprPtr det = simplify(mk_apply("-", {mk_apply("*", {a, d}), mk_apply("*", {b, c})}));
    auto over = [&](ExprPtr num) { return scalar_of(mk_apply("/", {std::move(num), det})); };
    ExprPtr neg1 = mk_const(Constant::real(Rational(-1)));
    return Value::of_vector(
        {Value::of_vector({over(d), over(mk_apply("*", {neg1, b}))}),
         Value::of_vector({over(mk_apply("*", {neg1, c})), over(a)})});
}

} // namespace

Value specialize_expr(const ExprPtr& e, const std::map<Variable, Value>& defs) {
    switch (e->kind) {
        case ExprKind::Const: return Value::of_const(e->lit, node_bt(e));

        case ExprKind::Var: {
            auto it = defs.find(e->var);
            if (it != defs.end()) return it->second;
            return residual_value(mk_var(e->var, e->span));
        }

        case ExprKind::VectorLit: {
            std::vector<Value> elems;
            elems.reserve(e->kids.size());
            for (const auto& k : e->kids) elems.push_back(specialize_expr(k, defs));
            return Value::of_vector(std::move(elems));
        }

        case ExprKind::Index: {
            Value target = specialize_expr(e->kids[0], defs);
            Value index = specialize_expr(e->kids[1], defs);
            if (index.is_static_const() && index.c.kind == Constant::Kind::Nat &&
                target.kind == Value::Kind::Vector) {
                // a static index looks up even in a dynamic vector
                if (!index.c.value.num().fits_longlong())
                    throw SpecError(SpecErrorKind::IndexOutOfBounds, "index out of range",
                                    e->kids[1]->span);
                long long i = index.c.value.num().to_longlong();
                if (i < 0 || i >= static_cast<long long>(target.elems.size()))
                    throw SpecError(SpecErrorKind::IndexOutOfBounds,
                                    "index " + std::to_string(i) + " out of bounds for vector of " +
                                        std::to_string(target.elems.size()) + " elements",
                                    e->kids[1]->span);
                return target.elems[static_cast<size_t>(i)];
            }
            return residual_value(mk_index(ve(target), ve(index), e->span));
        }

        case ExprKind::Apply: {
            const std::string& fn = e->fn;
            std::vector<Value> args;
            args.reserve(e->kids.size());
            for (const auto& k : e->kids) args.push_back(specialize_expr(k, defs));

            if (fn == "length") {
                if (args[0].kind != Value::Kind::Vector)
                    throw SpecError(SpecErrorKind::ArityError,
                                    "'length' needs a statically shaped vector", e->span);
                return Value::of_const(
                    Constant::nat(Rational(static_cast<long long>(args[0].elems.size()))), BT::S);
            }
            if (fn == "trans") return transpose(args[0], e->span);
            if (fn == "inv") return inverse2x2(args[0], e->span);
            if (fn == "*" &&
                (args[0].kind == Value::Kind::Vector || args[1].kind == Value::Kind::Vector)) {
                return matmul(args[0], args[1], e->span);
            }
            if (fn == ":") {
                if (args[0].is_static_const() && args[1].is_static_const() &&
                    args[0].c.kind == Constant::Kind::Nat && args[1].c.kind == Constant::Kind::Nat &&
                    args[0].c.value.num().fits_longlong() && args[1].c.value.num().fits_longlong()) {
                    long long a = args[0].c.value.num().to_longlong();
                    long long b = args[1].c.value.num().to_longlong();
                    std::vector<Value> elems;
                    for (long long i = a; i <= b; ++i)
                        elems.push_back(Value::of_const(Constant::nat(Rational(i)), BT::S));
                    return Value::of_vector(std::move(elems));
                }
                return residual_value(mk_apply(":", {ve(args[0]), ve(args[1])}, e->span));
            }

            bool all_const = true;
            for (const Value& a : args) all_const &= a.is_static_const();
            if (all_const && node_bt(e) == BT::S) {
                std::vector<Constant> cs;
                for (const Value& a : args) cs.push_back(a.c);
                StaticApplyResult r = static_apply(fn, cs, e->span);
                if (r.folded) return Value::of_const(r.value, BT::S);
                // exact evaluation is impossible (trig, pi): residualize
            }
            std::vector<ExprPtr> kids;
            kids.reserve(args.size());
            for (const Value& a : args) kids.push_back(ve(a));
            return residual_value(mk_apply(fn, std::move(kids), e->span));
        }

        case ExprKind::TimeDer: {
            Value v = specialize_expr(e->kids[0], defs);
            switch (v.kind) {
                case Value::Kind::Const:
                    if (!v.c.is_numeric() && v.c.kind != Constant::Kind::Pi)
                        throw SpecError(SpecErrorKind::NonDifferentiable,
                                        "time derivative of a boolean", e->span);
                    return Value::of_const(Constant::real(Rational(0)), node_bt(e));
                case Value::Kind::Residual: {
                    ExprPtr d = time_derivative(v.residual);
                    return shallow_value(d);
                }
                case Value::Kind::Vector:
                    throw SpecError(SpecErrorKind::NonDifferentiable,
                                    "time derivative of a vector value", e->span);
            }
            break;
        }

        case ExprKind::PartialDer: {
            Value target = specialize_expr(e->kids[1], defs);
            if (target.kind != Value::Kind::Residual || target.residual->kind != ExprKind::Var)
                throw SpecError(SpecErrorKind::NonVariablePartialTarget,
                                "differentiation target does not specialize to a variable",
                                e->kids[1]->span);
            Variable x = target.residual->var;
            Value of = specialize_expr(e->kids[0], defs);
            switch (of.kind) {
                case Value::Kind::Const:
                    return Value::of_const(Constant::real(Rational(0)),
                                           bt_join(of.bt, target.bt));
                case Value::Kind::Residual: return shallow_value(partial_derivative(of.residual, x));
                case Value::Kind::Vector: {
                    // component-wise over vector values
                    std::vector<Value> elems;
                    for (const Value& el : of.elems) {
                        if (el.kind == Value::Kind::Residual)
                            elems.push_back(shallow_value(partial_derivative(el.residual, x)));
                        else if (el.kind == Value::Kind::Const)
                            elems.push_back(Value::of_const(Constant::real(Rational(0)), el.bt));
                        else
                            throw SpecError(SpecErrorKind::NonDifferentiable,
                                            "nested vector in partial derivative", e->span);
                    }
                    return Value::of_vector(std::move(elems));
                }
            }
            break;
        }
    }
    throw SpecError(SpecErrorKind::ArityError, "malformed expression", e->span);
}

// ---------------------------------------------------------------------------
// Program specialization

namespace {

Value simplify_value(const Value& v) {
    switch (v.kind) {
        case Value::Kind::Const: return v;
        case Value::Kind::Residual: return shallow_value(simplify(v.residual));
        case Value::Kind::Vector: {
            std::vector<Value> elems;
            elems.reserve(v.elems.size());
            for (const Value& e : v.elems) elems.push_back(simplify_value(e));
            return Value::of_vector(std::move(elems));
        }
    }
    return v;
}

struct ProgramSpecializer {
    // transitive closure of variables the dynamics consume, seeded from every
    // equation that is not a plain directed definition
    std::set<Variable> taint;

    void seed_taint(const EqPtr& s, std::map<Variable, std::set<Variable>>& def_uses) {
        switch (s->kind) {
            case EqKind::Directed:
                if (s->lhs->var.primes == 0) {
                    def_uses[s->lhs->var] = free_vars(s->rhs);
                    return;
                }
                [[fallthrough]];
            case EqKind::Undirected:
            case EqKind::Reset: {
                auto fv = free_vars(s);
                taint.insert(fv.begin(), fv.end());
                return;
            }
            case EqKind::Cond: {
                auto fv = free_vars(s->guard);
                taint.insert(fv.begin(), fv.end());
                seed_taint_list(s->then_eq, def_uses);
                seed_taint_list(s->else_eq, def_uses);
                return;
            }
            case EqKind::Family: {
                auto fv = free_vars(s);
                taint.insert(fv.begin(), fv.end());
                return;
            }
            case EqKind::Set: seed_taint_list(s, def_uses); return;
        }
    }

    void seed_taint_list(const EqPtr& set, std::map<Variable, std::set<Variable>>& def_uses) {
        for (const auto& it : set->items) seed_taint(it, def_uses);
    }

    void close_taint(const std::map<Variable, std::set<Variable>>& def_uses) {
        std::vector<Variable> work(taint.begin(), taint.end());
        while (!work.empty()) {
            Variable v = work.back();
            work.pop_back();
            auto it = def_uses.find(v);
            if (it == def_uses.end()) continue;
            for (const Variable& u : it->second)
                if (taint.insert(u).second) work.push_back(u);
        }
    }

    // dependency-ordered processing of one equation list
    std::vector<EqPtr> run_list(const std::vector<EqPtr>& input, std::map<Variable, Value> defs) {
        // flatten nested sets: they share this scope
        std::vector<EqPtr> items;
        std::function<void(const EqPtr&)> flatten = [&](const EqPtr& s) {
            if (s->kind == EqKind::Set)
                for (const auto& it : s->items) flatten(it);
            else
                items.push_back(s);
        };
        for (const auto& s : input) flatten(s);

        size_t n = items.size();
        std::vector<std::set<Variable>> fvs(n), lvs(n);
        for (size_t i = 0; i < n; ++i) {
            fvs[i] = free_vars(items[i]);
            lvs[i] = left_vars(items[i]);
        }
        // i must run before j when j reads something i defines (also deep
        // inside i's branches, which blocks rather than substitutes)
        std::vector<std::vector<size_t>> succ(n);
        std::vector<size_t> indeg(n, 0);
        for (size_t i = 0; i < n; ++i) {
            for (size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                bool dep = false;
                for (const Variable& x : lvs[i])
                    if (fvs[j].count(x)) {
                        dep = true;
                        break;
                    }
                if (dep) {
                    succ[i].push_back(j);
                    ++indeg[j];
                }
            }
        }
        std::vector<size_t> order;
        std::vector<bool> done(n, false);
        for (;;) {
            size_t pick = n;
            for (size_t i = 0; i < n; ++i)
                if (!done[i] && indeg[i] == 0) {
                    pick = i;
                    break;
                }
            if (pick == n) break;
            done[pick] = true;
            order.push_back(pick);
            for (size_t j : succ[pick])
                if (!done[j]) --indeg[j];
        }
        if (order.size() != n) {
            std::string cyc;
            for (size_t i = 0; i < n; ++i)
                if (!done[i])
                    for (const Variable& x : lvs[i]) cyc += (cyc.empty() ? "" : ", ") + x.str();
            SourceSpan sp;
            for (size_t i = 0; i < n; ++i)
                if (!done[i]) {
                    sp = items[i]->span;
                    break;
                }
            throw SpecError(SpecErrorKind::StaticCycle,
                            "cyclic definitions: " + (cyc.empty() ? "(unnamed)" : cyc), sp);
        }

        std::vector<EqPtr> out_by_pos(n);
        for (size_t idx : order) {
            const EqPtr& s = items[idx];
            out_by_pos[idx] = run_one(s, defs);
        }
        std::vector<EqPtr> out;
        for (auto& e : out_by_pos)
            if (e) {
                if (e->kind == EqKind::Set) // spliced branch/family output
                    for (const auto& it : e->items) out.push_back(it);
                else
                    out.push_back(e);
            }
        return out;
    }

    // result is the residual equation, a Set to splice, or null to drop
    EqPtr run_one(const EqPtr& s, std::map<Variable, Value>& defs) {
        switch (s->kind) {
            case EqKind::Directed: {
                Value v = simplify_value(specialize_expr(s->rhs, defs));
                defs[s->lhs->var] = v;
                auto n = std::make_shared<Equation>(*s);
                n->rhs = ve(v);
                n->bt = v.bt;
                return n;
            }
            case EqKind::Reset: {
                Value v = simplify_value(specialize_expr(s->rhs, defs));
                auto n = std::make_shared<Equation>(*s);
                n->rhs = ve(v);
                n->bt = v.bt;
                return n;
            }
            case EqKind::Undirected: {
                Value l = simplify_value(specialize_expr(s->lhs, defs));
                Value r = simplify_value(specialize_expr(s->rhs, defs));
                auto n = std::make_shared<Equation>(*s);
                n->lhs = ve(l);
                n->rhs = ve(r);
                n->bt = bt_join(l.bt, r.bt);
                return n;
            }
            case EqKind::Cond: {
                Value g = simplify_value(specialize_expr(s->guard, defs));
                if (g.is_static_const() && g.c.kind == Constant::Kind::Bool) {
                    const EqPtr& branch = g.c.bval ? s->then_eq : s->else_eq;
                    std::vector<EqPtr> w = run_list(branch->items, defs); // branch scope
                    return mk_set(std::move(w), s->span);
                }
                auto n = std::make_shared<Equation>(*s);
                n->guard = ve(g);
                n->then_eq = mk_set(run_list(s->then_eq->items, defs), s->then_eq->span);
                n->else_eq = mk_set(run_list(s->else_eq->items, defs), s->else_eq->span);
                n->bt = BT::D;
                return n;
            }
            case EqKind::Family: {
                Value range = simplify_value(specialize_expr(s->range, defs));
                if (range.kind != Value::Kind::Vector)
                    throw SpecError(SpecErrorKind::ArityError,
                                    "family range is not statically a vector", s->range->span);
                std::vector<EqPtr> instances;
                for (const Value& el : range.elems)
                    instances.push_back(substitute(s->body, s->binder->var, ve(el)));
                std::vector<EqPtr> w = run_list(instances, defs);
                return mk_set(std::move(w), s->span);
            }
            case EqKind::Set: {
                // flattened by run_list; reaching here means a lone set
                return mk_set(run_list(s->items, defs), s->span);
            }
        }
        return nullptr;
    }
};

void collect_outputs(const EqPtr& residual_set, const std::set<Variable>& taint,
                     std::set<Variable>& out) {
    for (const auto& s : residual_set->items) {
        if (s->kind != EqKind::Directed) continue;
        const Variable& x = s->lhs->var;
        if (x.primes != 0 || taint.count(x)) continue;
        // scalar dynamic definitions only: static ones are parameters,
        // vectors have no scalar reading
        if (s->rhs->kind == ExprKind::VectorLit) continue;
        bool is_static_const = s->rhs->kind == ExprKind::Const;
        if (is_static_const) continue;
        out.insert(x);
    }
}

} // namespace

ResidualProgram specialize_program(const EqPtr& annotated) {
    ProgramSpecializer ps;
    std::map<Variable, std::set<Variable>> def_uses;
    ps.seed_taint(annotated, def_uses);
    ps.close_taint(def_uses);

    std::vector<EqPtr> top =
        annotated->kind == EqKind::Set ? annotated->items : std::vector<EqPtr>{annotated};
    std::vector<EqPtr> out = ps.run_list(top, {});

    ResidualProgram res;
    res.program = mk_set(std::move(out), annotated->span);
    collect_outputs(res.program, ps.taint, res.output_vars);
    return res;
}

bool residual_pure(const EqPtr& s) {
    std::function<bool(const ExprPtr&)> expr_pure = [&](const ExprPtr& e) -> bool {
        if (!e) return true;
        if (e->kind == ExprKind::PartialDer) return false;
        for (const auto& k : e->kids)
            if (!expr_pure(k)) return false;
        return true;
    };
    std::function<bool(const EqPtr&)> eq_pure = [&](const EqPtr& q) -> bool {
        if (!q) return true;
        if (q->kind == EqKind::Family) return false;
        if (!expr_pure(q->lhs) || !expr_pure(q->rhs) || !expr_pure(q->guard) ||
            !expr_pure(q->range) || !expr_pure(q->binder))
            return false;
        if (!eq_pure(q->then_eq) || !eq_pure(q->else_eq) || !eq_pure(q->body)) return false;
        for (const auto& it : q->items)
            if (!eq_pure(it)) return false;
        return true;
    };
    return eq_pure(s);
}

} // namespace coredel
