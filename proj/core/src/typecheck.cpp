#include "coredel/typecheck.hpp"

#include <functional>

namespace coredel {

namespace {

bool is_numeric(const Type& t) { return t.kind == Type::Kind::Nat || t.kind == Type::Kind::Real; }

Type join_numeric(const Type& a, const Type& b) {
    return (a.kind == Type::Kind::Nat && b.kind == Type::Kind::Nat) ? Type::nat() : Type::real();
}

// m x k matrix of reals (nat entries acceptable)
bool matrix_shape(const Type& t, size_t& m, size_t& k) {
    if (t.kind != Type::Kind::Vector || t.elems.empty()) return false;
    const Type& first = t.elems[0];
    if (first.kind != Type::Kind::Vector) return false;
    k = first.elems.size();
    m = t.elems.size();
    for (const Type& row : t.elems) {
        if (row.kind != Type::Kind::Vector || row.elems.size() != k) return false;
        for (const Type& e : row.elems)
            if (!is_numeric(e)) return false;
    }
    return true;
}

bool flat_numeric_vector(const Type& t, size_t& m) {
    if (t.kind != Type::Kind::Vector) return false;
    m = t.elems.size();
    for (const Type& e : t.elems)
        if (!is_numeric(e)) return false;
    return true;
}

Type real_matrix(size_t m, size_t k) {
    return Type::vector(std::vector<Type>(m, Type::vector(std::vector<Type>(k, Type::real()))));
}

Type real_vector(size_t m) { return Type::vector(std::vector<Type>(m, Type::real())); }

[[noreturn]] void fail(const std::string& code, const std::string& msg, SourceSpan sp) {
    throw TypeError(code, msg, sp);
}

Type type_apply(const std::string& fn, const std::vector<Type>& args, const ExprPtr& e) {
    const BuiltinInfo* info = builtin_info(fn);
    if (!info) fail("UnboundVariable", "unknown function '" + fn + "'", e->span);
    if (static_cast<int>(args.size()) != info->arity)
        fail("ArityMismatch", "'" + fn + "' expects " + std::to_string(info->arity) + " argument(s)",
             e->span);

    auto need_numeric = [&](const Type& t, int i) {
        if (!is_numeric(t))
            fail("TypeMismatch",
                 "'" + fn + "' argument " + std::to_string(i + 1) + " must be numeric, got " + t.str(),
                 e->kids[i]->span);
    };

    if (fn == "+" || fn == "-") {
        need_numeric(args[0], 0);
        need_numeric(args[1], 1);
        return join_numeric(args[0], args[1]);
    }
    if (fn == "*") {
        // matrix forms: (m x k)(k x n), and (m x k) times a flat k-vector;
        // an m x 1 product collapses to a flat vector
        size_t m, k, k2, n;
        if (matrix_shape(args[0], m, k)) {
            if (matrix_shape(args[1], k2, n) && k == k2)
                return n == 1 ? real_vector(m) : real_matrix(m, n);
            if (flat_numeric_vector(args[1], k2) && k == k2) return real_vector(m);
            fail("TypeMismatch", "matrix product shape mismatch", e->span);
        }
        need_numeric(args[0], 0);
        need_numeric(args[1], 1);
        return join_numeric(args[0], args[1]);
    }
    if (fn == "/") {
        need_numeric(args[0], 0);
        need_numeric(args[1], 1);
        return Type::real();
    }
    if (fn == "^") {
        need_numeric(args[0], 0);
        if (args[1].kind != Type::Kind::Nat)
            fail("TypeMismatch", "'^' exponent must be nat, got " + args[1].str(), e->kids[1]->span);
        return args[0];
    }
    if (fn == "sin" || fn == "cos") {
        need_numeric(args[0], 0);
        return Type::real();
    }
    if (fn == "&&" || fn == "||") {
        for (int i = 0; i < 2; ++i)
            if (args[i].kind != Type::Kind::Bool)
                fail("TypeMismatch", "'" + fn + "' operands must be bool", e->kids[i]->span);
        return Type::boolean();
    }
    if (fn == ">" || fn == ">=") {
        need_numeric(args[0], 0);
        need_numeric(args[1], 1);
        return Type::boolean();
    }
    if (fn == "==" || fn == "!=") {
        bool both_bool = args[0].kind == Type::Kind::Bool && args[1].kind == Type::Kind::Bool;
        bool both_num = is_numeric(args[0]) && is_numeric(args[1]);
        if (!both_bool && !both_num)
            fail("TypeMismatch", "'" + fn + "' needs operands of equal type", e->span);
        return Type::boolean();
    }
    if (fn == "length") {
        if (!args[0].is_vector())
            fail("TypeMismatch", "'length' needs a vector, got " + args[0].str(), e->kids[0]->span);
        return Type::nat();
    }
    if (fn == "trans") {
        size_t m, k;
        if (matrix_shape(args[0], m, k)) return real_matrix(k, m);
        if (flat_numeric_vector(args[0], m)) return real_matrix(m, 1);
        fail("TypeMismatch", "'trans' needs a vector or matrix", e->kids[0]->span);
    }
    if (fn == "inv") {
        size_t m, k;
        if (!matrix_shape(args[0], m, k) || m != 2 || k != 2)
            fail("TypeMismatch", "'inv' supports 2 x 2 matrices only", e->kids[0]->span);
        return real_matrix(2, 2);
    }
    if (fn == ":") {
        for (int i = 0; i < 2; ++i)
            if (args[i].kind != Type::Kind::Nat)
                fail("TypeMismatch", "range bounds must be nat", e->kids[i]->span);
        return Type::vector_h(Type::nat());
    }
    fail("TypeMismatch", "no typing rule for '" + fn + "'", e->span);
}

} // namespace

Type type_check_expr(const TypeEnv& env, const ExprPtr& e) {
    switch (e->kind) {
        case ExprKind::Const:
            switch (e->lit.kind) {
                case Constant::Kind::Nat: return Type::nat();
                case Constant::Kind::Real:
                case Constant::Kind::Pi: return Type::real();
                case Constant::Kind::Bool: return Type::boolean();
            }
            break;

        case ExprKind::Var: {
            const Variable& x = e->var;
            auto it = env.find(x);
            if (it == env.end())
                fail("UnboundVariable", "unbound variable '" + x.str() + "'", e->span);
            if (x.primes == 0) return it->second;
            // primed variables require the whole chain of lower derivatives at real
            if (it->second != Type::real())
                fail("TypeMismatch", "'" + x.str() + "' must have type real", e->span);
            for (int k = 0; k < x.primes; ++k) {
                Variable lower(x.base, k);
                auto lo = env.find(lower);
                if (lo == env.end())
                    fail("MissingUnprimedBinding",
                         "'" + x.str() + "' requires '" + lower.str() + "' to be bound", e->span);
                if (lo->second != Type::real())
                    fail("TypeMismatch", "'" + lower.str() + "' must have type real", e->span);
            }
            return Type::real();
        }

        case ExprKind::VectorLit: {
            std::vector<Type> ts;
            ts.reserve(e->kids.size());
            for (const auto& k : e->kids) ts.push_back(type_check_expr(env, k));
            if (ts.empty()) fail("TypeMismatch", "empty vector literal", e->span);
            return Type::vector(std::move(ts));
        }

        case ExprKind::Index: {
            Type target = type_check_expr(env, e->kids[0]);
            Type index = type_check_expr(env, e->kids[1]);
            if (!target.is_vector())
                fail("TypeMismatch", "indexing a non-vector of type " + target.str(),
                     e->kids[0]->span);
            if (index.kind != Type::Kind::Nat)
                fail("TypeMismatch", "index must be nat, got " + index.str(), e->kids[1]->span);
            if (target.kind == Type::Kind::VectorH) return target.elems[0];
            const ExprPtr& ie = e->kids[1];
            if (ie->kind == ExprKind::Const && ie->lit.kind == Constant::Kind::Nat) {
                if (!ie->lit.value.num().fits_longlong())
                    fail("IndexOutOfBounds", "index literal out of range", ie->span);
                long long i = ie->lit.value.num().to_longlong();
                if (i < 0 || i >= static_cast<long long>(target.elems.size()))
                    fail("IndexOutOfBounds",
                         "index " + std::to_string(i) + " out of bounds for vector of arity " +
                             std::to_string(target.elems.size()),
                         ie->span);
                return target.elems[static_cast<size_t>(i)];
            }
            // non-literal index requires a homogeneous vector
            for (const Type& t : target.elems)
                if (t != target.elems[0])
                    fail("TypeMismatch", "non-literal index into a heterogeneous vector", e->span);
            return target.elems[0];
        }

        case ExprKind::Apply: {
            std::vector<Type> ts;
            ts.reserve(e->kids.size());
            for (const auto& k : e->kids) ts.push_back(type_check_expr(env, k));
            return type_apply(e->fn, ts, e);
        }

        case ExprKind::TimeDer: {
            Type t = type_check_expr(env, e->kids[0]);
            if (!is_numeric(t))
                fail("TypeMismatch", "time derivative of non-real expression", e->kids[0]->span);
            return Type::real();
        }

        case ExprKind::PartialDer: {
            Type of = type_check_expr(env, e->kids[0]);
            Type wrt = type_check_expr(env, e->kids[1]);
            if (!is_numeric(of))
                fail("TypeMismatch", "partial derivative of non-real expression", e->kids[0]->span);
            if (!is_numeric(wrt))
                fail("TypeMismatch", "partial derivative target must be real", e->kids[1]->span);
            return Type::real();
        }
    }
    fail("TypeMismatch", "malformed expression", e->span);
}

void type_check_eqn(const TypeEnv& env, const EqPtr& s) {
    switch (s->kind) {
        case EqKind::Directed:
        case EqKind::Reset: {
            Type lhs = type_check_expr(env, s->lhs);
            Type rhs = type_check_expr(env, s->rhs);
            if (!type_assignable(rhs, lhs))
                fail("TypeMismatch",
                     "cannot equate '" + s->lhs->var.str() + "' of type " + lhs.str() +
                         " with expression of type " + rhs.str(),
                     s->span);
            return;
        }
        case EqKind::Undirected: {
            Type l = type_check_expr(env, s->lhs);
            Type r = type_check_expr(env, s->rhs);
            if (!type_assignable(r, l) && !type_assignable(l, r))
                fail("TypeMismatch", "equation sides have types " + l.str() + " and " + r.str(),
                     s->span);
            return;
        }
        case EqKind::Cond: {
            Type g = type_check_expr(env, s->guard);
            if (g.kind != Type::Kind::Bool)
                throw TypeError("GuardNotBool", "condition has type " + g.str() + ", expected bool",
                                s->guard->span);
            type_check_eqn(env, s->then_eq);
            type_check_eqn(env, s->else_eq);
            return;
        }
        case EqKind::Family: {
            if (s->binder->var.primes != 0)
                fail("TypeMismatch", "family binder must be an unprimed name", s->binder->span);
            Type r = type_check_expr(env, s->range);
            Type elem;
            if (r.kind == Type::Kind::VectorH) {
                elem = r.elems[0];
            } else if (r.kind == Type::Kind::Vector) {
                for (const Type& t : r.elems)
                    if (t != r.elems[0])
                        fail("TypeMismatch", "family range must be a homogeneous vector",
                             s->range->span);
                elem = r.elems[0];
            } else {
                fail("TypeMismatch", "family range must be a vector, got " + r.str(),
                     s->range->span);
            }
            TypeEnv inner = env;
            inner[s->binder->var] = elem;
            type_check_eqn(inner, s->body);
            return;
        }
        case EqKind::Set:
            for (const auto& it : s->items) type_check_eqn(env, it);
            return;
    }
}

namespace {

// occurrences with binder shadowing respected
void collect_vars(const ExprPtr& e, std::set<Variable>& shadow, std::set<Variable>& out) {
    if (!e) return;
    if (e->kind == ExprKind::Var) {
        if (!shadow.count(e->var)) out.insert(e->var);
        return;
    }
    for (const auto& k : e->kids) collect_vars(k, shadow, out);
}

void collect_vars(const EqPtr& s, std::set<Variable>& shadow, std::set<Variable>& out) {
    if (!s) return;
    switch (s->kind) {
        case EqKind::Directed:
        case EqKind::Reset:
            collect_vars(s->lhs, shadow, out);
            collect_vars(s->rhs, shadow, out);
            return;
        case EqKind::Undirected:
            collect_vars(s->lhs, shadow, out);
            collect_vars(s->rhs, shadow, out);
            return;
        case EqKind::Cond:
            collect_vars(s->guard, shadow, out);
            collect_vars(s->then_eq, shadow, out);
            collect_vars(s->else_eq, shadow, out);
            return;
        case EqKind::Family: {
            collect_vars(s->range, shadow, out);
            bool added = shadow.insert(s->binder->var).second;
            collect_vars(s->body, shadow, out);
            if (added) shadow.erase(s->binder->var);
            return;
        }
        case EqKind::Set:
            for (const auto& it : s->items) collect_vars(it, shadow, out);
            return;
    }
}

void collect_directed(const EqPtr& s, std::vector<EqPtr>& out) {
    if (!s) return;
    switch (s->kind) {
        case EqKind::Directed: out.push_back(s); return;
        case EqKind::Cond:
            collect_directed(s->then_eq, out);
            collect_directed(s->else_eq, out);
            return;
        case EqKind::Family: collect_directed(s->body, out); return;
        case EqKind::Set:
            for (const auto& it : s->items) collect_directed(it, out);
            return;
        default: return;
    }
}

} // namespace

TypeEnv infer_env(const EqPtr& program) {
    TypeEnv env;

    std::set<Variable> shadow, occurring;
    collect_vars(program, shadow, occurring);

    // primed occurrences pin the whole derivative chain at real
    for (const Variable& v : occurring)
        if (v.primes > 0)
            for (int k = 0; k <= v.primes; ++k) env[Variable(v.base, k)] = Type::real();

    // directed definitions take the type of their right-hand side; everything
    // never defined is runtime state and defaults to real first, so
    // definitions over state variables resolve
    std::vector<EqPtr> defs;
    collect_directed(program, defs);
    std::set<Variable> defined;
    for (const EqPtr& d : defs) defined.insert(d->lhs->var);
    for (const Variable& v : occurring)
        if (!defined.count(v) && !env.count(v)) env[v] = Type::real();

    bool progress = true;
    while (progress) {
        progress = false;
        for (const EqPtr& d : defs) {
            const Variable& x = d->lhs->var;
            if (env.count(x)) continue;
            try {
                Type t = type_check_expr(env, d->rhs);
                env[x] = t;
                progress = true;
            } catch (const TypeError&) {
                // dependencies not resolved yet (or genuinely ill-typed; the
                // real check reports that later)
            }
        }
    }

    // leftovers are definition cycles; treat them as runtime state
    for (const Variable& v : occurring)
        if (!env.count(v)) env[v] = Type::real();

    return env;
}

} // namespace coredel
