#include "coredel/ast.hpp"

#include <stdexcept>

namespace coredel {

std::string Label::str() const {
    std::string s = "root";
    for (int i : path) {
        s += '.';
        s += std::to_string(i);
    }
    return s;
}

bool Constant::operator==(const Constant& o) const {
    if (kind != o.kind) return false;
    switch (kind) {
        case Kind::Nat:
        case Kind::Real: return value == o.value;
        case Kind::Bool: return bval == o.bval;
        case Kind::Pi: return true;
    }
    return false;
}

bool Type::operator==(const Type& o) const {
    if (kind != o.kind) return false;
    if (elems.size() != o.elems.size()) return false;
    for (size_t i = 0; i < elems.size(); ++i)
        if (!(elems[i] == o.elems[i])) return false;
    return true;
}

bool type_assignable(const Type& from, const Type& to) {
    if (from == to) return true;
    if (from.kind == Type::Kind::Nat && to.kind == Type::Kind::Real) return true;
    if (from.kind == Type::Kind::Vector && to.kind == Type::Kind::Vector &&
        from.elems.size() == to.elems.size()) {
        for (size_t i = 0; i < from.elems.size(); ++i)
            if (!type_assignable(from.elems[i], to.elems[i])) return false;
        return true;
    }
    if (from.kind == Type::Kind::Vector && to.kind == Type::Kind::VectorH) {
        for (const Type& e : from.elems)
            if (!type_assignable(e, to.elems[0])) return false;
        return true;
    }
    return false;
}

std::string Type::str() const {
    switch (kind) {
        case Kind::Nat: return "nat";
        case Kind::Bool: return "bool";
        case Kind::Real: return "real";
        case Kind::VectorH: return "vector of " + elems[0].str();
        case Kind::Vector: {
            std::string s = "(";
            for (size_t i = 0; i < elems.size(); ++i) {
                if (i) s += ", ";
                s += elems[i].str();
            }
            return s + ")";
        }
    }
    return "?";
}

// ---------------------------------------------------------------------------

ExprPtr mk_const(Constant c, SourceSpan sp) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Const;
    e->lit = std::move(c);
    e->span = sp;
    return e;
}

ExprPtr mk_var(Variable v, SourceSpan sp) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Var;
    e->var = std::move(v);
    e->span = sp;
    return e;
}

ExprPtr mk_vector(std::vector<ExprPtr> elems, SourceSpan sp) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::VectorLit;
    e->kids = std::move(elems);
    e->span = sp;
    return e;
}

ExprPtr mk_index(ExprPtr target, ExprPtr index, SourceSpan sp) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Index;
    e->kids = {std::move(target), std::move(index)};
    e->span = sp;
    return e;
}

ExprPtr mk_apply(std::string fn, std::vector<ExprPtr> args, SourceSpan sp) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Apply;
    e->fn = std::move(fn);
    e->kids = std::move(args);
    e->span = sp;
    return e;
}

ExprPtr mk_time_der(ExprPtr inner, SourceSpan sp) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::TimeDer;
    e->kids = {std::move(inner)};
    e->span = sp;
    return e;
}

ExprPtr mk_partial_der(ExprPtr of, ExprPtr wrt, SourceSpan sp) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::PartialDer;
    e->kids = {std::move(of), std::move(wrt)};
    e->span = sp;
    return e;
}

ExprPtr mk_num(long long v) {
    return mk_const(v >= 0 ? Constant::nat(Rational(v)) : Constant::real(Rational(v)));
}

ExprPtr mk_rat(const Rational& v) { return mk_const(Constant::real(v)); }

EqPtr mk_directed(ExprPtr lhs_var, ExprPtr rhs, SourceSpan sp) {
    auto s = std::make_shared<Equation>();
    s->kind = EqKind::Directed;
    s->lhs = std::move(lhs_var);
    s->rhs = std::move(rhs);
    s->span = sp;
    return s;
}

EqPtr mk_undirected(ExprPtr lhs, ExprPtr rhs, SourceSpan sp) {
    auto s = std::make_shared<Equation>();
    s->kind = EqKind::Undirected;
    s->lhs = std::move(lhs);
    s->rhs = std::move(rhs);
    s->span = sp;
    return s;
}

EqPtr mk_reset(ExprPtr lhs_var, ExprPtr rhs, SourceSpan sp) {
    auto s = std::make_shared<Equation>();
    s->kind = EqKind::Reset;
    s->lhs = std::move(lhs_var);
    s->rhs = std::move(rhs);
    s->span = sp;
    return s;
}

EqPtr mk_cond(ExprPtr guard, EqPtr then_eq, EqPtr else_eq, SourceSpan sp) {
    auto s = std::make_shared<Equation>();
    s->kind = EqKind::Cond;
    s->guard = std::move(guard);
    s->then_eq = std::move(then_eq);
    s->else_eq = std::move(else_eq);
    s->span = sp;
    return s;
}

EqPtr mk_family(ExprPtr binder, ExprPtr range, EqPtr body, SourceSpan sp) {
    auto s = std::make_shared<Equation>();
    s->kind = EqKind::Family;
    s->binder = std::move(binder);
    s->range = std::move(range);
    s->body = std::move(body);
    s->span = sp;
    return s;
}

EqPtr mk_set(std::vector<EqPtr> items, SourceSpan sp) {
    auto s = std::make_shared<Equation>();
    s->kind = EqKind::Set;
    s->items = std::move(items);
    s->span = sp;
    return s;
}

// ---------------------------------------------------------------------------
// Structural comparison

static int cmp_constant(const Constant& a, const Constant& b) {
    if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind) ? -1 : 1;
    switch (a.kind) {
        case Constant::Kind::Nat:
        case Constant::Kind::Real: return Rational::cmp(a.value, b.value);
        case Constant::Kind::Bool: return a.bval == b.bval ? 0 : (a.bval ? 1 : -1);
        case Constant::Kind::Pi: return 0;
    }
    return 0;
}

int cmp_expr(const ExprPtr& a, const ExprPtr& b) {
    if (a == b) return 0;
    if (!a || !b) return a ? 1 : -1;
    if (a->kind != b->kind) return static_cast<int>(a->kind) < static_cast<int>(b->kind) ? -1 : 1;
    switch (a->kind) {
        case ExprKind::Const: return cmp_constant(a->lit, b->lit);
        case ExprKind::Var:
            if (a->var != b->var) return a->var < b->var ? -1 : 1;
            return 0;
        case ExprKind::Apply:
            if (a->fn != b->fn) return a->fn < b->fn ? -1 : 1;
            break;
        default: break;
    }
    if (a->kids.size() != b->kids.size()) return a->kids.size() < b->kids.size() ? -1 : 1;
    for (size_t i = 0; i < a->kids.size(); ++i)
        if (int c = cmp_expr(a->kids[i], b->kids[i])) return c;
    return 0;
}

int cmp_eq(const EqPtr& a, const EqPtr& b) {
    if (a == b) return 0;
    if (!a || !b) return a ? 1 : -1;
    if (a->kind != b->kind) return static_cast<int>(a->kind) < static_cast<int>(b->kind) ? -1 : 1;
    auto chain = [](std::initializer_list<int> cs) {
        for (int c : cs)
            if (c) return c;
        return 0;
    };
    switch (a->kind) {
        case EqKind::Directed:
        case EqKind::Undirected:
        case EqKind::Reset: return chain({cmp_expr(a->lhs, b->lhs), cmp_expr(a->rhs, b->rhs)});
        case EqKind::Cond:
            return chain({cmp_expr(a->guard, b->guard), cmp_eq(a->then_eq, b->then_eq),
                          cmp_eq(a->else_eq, b->else_eq)});
        case EqKind::Family:
            return chain({cmp_expr(a->binder, b->binder), cmp_expr(a->range, b->range),
                          cmp_eq(a->body, b->body)});
        case EqKind::Set: {
            if (a->items.size() != b->items.size()) return a->items.size() < b->items.size() ? -1 : 1;
            for (size_t i = 0; i < a->items.size(); ++i)
                if (int c = cmp_eq(a->items[i], b->items[i])) return c;
            return 0;
        }
    }
    return 0;
}

bool equal_expr(const ExprPtr& a, const ExprPtr& b) { return cmp_expr(a, b) == 0; }
bool equal_eq(const EqPtr& a, const EqPtr& b) { return cmp_eq(a, b) == 0; }

// ---------------------------------------------------------------------------
// Free and left variables

static void free_vars_into(const ExprPtr& e, std::set<Variable>& out) {
    if (!e) return;
    switch (e->kind) {
        case ExprKind::Const: return;
        case ExprKind::Var: out.insert(e->var); return;
        default:
            for (const auto& k : e->kids) free_vars_into(k, out);
    }
}

static void free_vars_into(const EqPtr& s, std::set<Variable>& out) {
    if (!s) return;
    switch (s->kind) {
        case EqKind::Directed:
        case EqKind::Reset:
            // the defined variable is not a use
            free_vars_into(s->rhs, out);
            return;
        case EqKind::Undirected:
            free_vars_into(s->lhs, out);
            free_vars_into(s->rhs, out);
            return;
        case EqKind::Cond:
            free_vars_into(s->guard, out);
            free_vars_into(s->then_eq, out);
            free_vars_into(s->else_eq, out);
            return;
        case EqKind::Family: {
            free_vars_into(s->range, out);
            std::set<Variable> body;
            free_vars_into(s->body, body);
            body.erase(s->binder->var);
            out.insert(body.begin(), body.end());
            return;
        }
        case EqKind::Set:
            for (const auto& it : s->items) free_vars_into(it, out);
            return;
    }
}

std::set<Variable> free_vars(const ExprPtr& e) {
    std::set<Variable> out;
    free_vars_into(e, out);
    return out;
}

std::set<Variable> free_vars(const EqPtr& s) {
    std::set<Variable> out;
    free_vars_into(s, out);
    return out;
}

static void left_vars_into(const EqPtr& s, std::set<Variable>& out) {
    if (!s) return;
    switch (s->kind) {
        case EqKind::Directed: out.insert(s->lhs->var); return;
        case EqKind::Undirected:
        case EqKind::Reset: return;
        case EqKind::Cond:
            left_vars_into(s->then_eq, out);
            left_vars_into(s->else_eq, out);
            return;
        case EqKind::Family: left_vars_into(s->body, out); return;
        case EqKind::Set:
            for (const auto& it : s->items) left_vars_into(it, out);
            return;
    }
}

std::set<Variable> left_vars(const EqPtr& s) {
    std::set<Variable> out;
    left_vars_into(s, out);
    return out;
}

// ---------------------------------------------------------------------------
// Substitution

static ExprPtr clone_with(const Expr& e, std::vector<ExprPtr> kids) {
    auto n = std::make_shared<Expr>(e);
    n->kids = std::move(kids);
    return n;
}

ExprPtr substitute(const ExprPtr& e, const Variable& x, const ExprPtr& v) {
    if (!e) return e;
    switch (e->kind) {
        case ExprKind::Const: return e;
        case ExprKind::Var: return e->var == x ? v : e;
        default: {
            bool changed = false;
            std::vector<ExprPtr> kids;
            kids.reserve(e->kids.size());
            for (const auto& k : e->kids) {
                ExprPtr nk = substitute(k, x, v);
                changed |= nk != k;
                kids.push_back(std::move(nk));
            }
            return changed ? clone_with(*e, std::move(kids)) : e;
        }
    }
}

static std::string fresh_name(const std::string& base, const std::set<Variable>& avoid) {
    for (int i = 1;; ++i) {
        std::string cand = base + "_" + std::to_string(i);
        if (!avoid.count(Variable(cand))) return cand;
    }
}

EqPtr substitute(const EqPtr& s, const Variable& x, const ExprPtr& v) {
    if (!s) return s;
    auto n = [&](auto mutate) {
        auto c = std::make_shared<Equation>(*s);
        mutate(*c);
        return EqPtr(c);
    };
    switch (s->kind) {
        case EqKind::Directed:
        case EqKind::Reset: {
            ExprPtr r = substitute(s->rhs, x, v);
            // the left-hand side is a binding position, not a use
            if (r == s->rhs) return s;
            return n([&](Equation& c) { c.rhs = r; });
        }
        case EqKind::Undirected: {
            ExprPtr l = substitute(s->lhs, x, v), r = substitute(s->rhs, x, v);
            if (l == s->lhs && r == s->rhs) return s;
            return n([&](Equation& c) {
                c.lhs = l;
                c.rhs = r;
            });
        }
        case EqKind::Cond: {
            ExprPtr g = substitute(s->guard, x, v);
            EqPtr t = substitute(s->then_eq, x, v), e = substitute(s->else_eq, x, v);
            if (g == s->guard && t == s->then_eq && e == s->else_eq) return s;
            return n([&](Equation& c) {
                c.guard = g;
                c.then_eq = t;
                c.else_eq = e;
            });
        }
        case EqKind::Family: {
            ExprPtr r = substitute(s->range, x, v);
            if (s->binder->var == x) {
                // binder shadows x
                if (r == s->range) return s;
                return n([&](Equation& c) { c.range = r; });
            }
            EqPtr body = s->body;
            ExprPtr binder = s->binder;
            std::set<Variable> vfv = free_vars(v);
            if (vfv.count(s->binder->var)) {
                // alpha-rename to avoid capturing the binder
                std::set<Variable> avoid = vfv;
                auto bfv = free_vars(s->body);
                avoid.insert(bfv.begin(), bfv.end());
                Variable nb(fresh_name(s->binder->var.base, avoid));
                auto nbe = std::make_shared<Expr>(*s->binder);
                nbe->var = nb;
                binder = nbe;
                body = substitute(body, s->binder->var, mk_var(nb, s->binder->span));
            }
            EqPtr nb = substitute(body, x, v);
            if (r == s->range && nb == s->body && binder == s->binder) return s;
            return n([&](Equation& c) {
                c.range = r;
                c.body = nb;
                c.binder = binder;
            });
        }
        case EqKind::Set: {
            bool changed = false;
            std::vector<EqPtr> items;
            items.reserve(s->items.size());
            for (const auto& it : s->items) {
                EqPtr ni = substitute(it, x, v);
                changed |= ni != it;
                items.push_back(std::move(ni));
            }
            if (!changed) return s;
            return n([&](Equation& c) { c.items = std::move(items); });
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// Erasure

ExprPtr erase(const ExprPtr& e) {
    if (!e) return e;
    auto n = std::make_shared<Expr>(*e);
    n->label = Label{};
    n->bt.reset();
    for (auto& k : n->kids) k = erase(k);
    return n;
}

EqPtr erase(const EqPtr& s) {
    if (!s) return s;
    auto n = std::make_shared<Equation>(*s);
    n->label = Label{};
    n->bt.reset();
    n->lhs = erase(n->lhs);
    n->rhs = erase(n->rhs);
    n->guard = erase(n->guard);
    n->then_eq = erase(n->then_eq);
    n->else_eq = erase(n->else_eq);
    n->binder = erase(n->binder);
    n->range = erase(n->range);
    n->body = erase(n->body);
    for (auto& it : n->items) it = erase(it);
    return n;
}

// ---------------------------------------------------------------------------
// Builtin table

const BuiltinInfo* builtin_info(const std::string& fn) {
    //                                      arity arith cmp  logic diff struct
    static const std::map<std::string, BuiltinInfo> table = {
        {"+",      {2, true, false, false, true, false}},
        {"-",      {2, true, false, false, true, false}},
        {"*",      {2, true, false, false, true, true}}, // structural on matrices
        {"/",      {2, true, false, false, true, false}},
        {"^",      {2, true, false, false, true, false}},
        {"&&",     {2, false, false, true, false, false}},
        {"||",     {2, false, false, true, false, false}},
        {">",      {2, false, true, false, false, false}},
        {">=",     {2, false, true, false, false, false}},
        {"==",     {2, false, true, false, false, false}},
        {"!=",     {2, false, true, false, false, false}},
        {"sin",    {1, false, false, false, true, false}},
        {"cos",    {1, false, false, false, true, false}},
        {"length", {1, false, false, false, false, true}},
        {"inv",    {1, false, false, false, false, true}},
        {"trans",  {1, false, false, false, false, true}},
        {":",      {2, false, false, false, false, true}},
    };
    auto it = table.find(fn);
    return it == table.end() ? nullptr : &it->second;
}

} // namespace coredel
