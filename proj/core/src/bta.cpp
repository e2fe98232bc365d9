#include "coredel/bta.hpp"

#include <sstream>

namespace coredel {

std::string BTExpr::str() const {
    if (kind == Kind::Const) return bt == BT::S ? "S" : "D";
    return lab.str();
}

std::string Constraint::str() const { return lhs.str() + " <= " + rhs.str(); }

void ConstraintSet::add(Constraint c) {
    if (seen_.insert(c).second) items_.push_back(std::move(c));
}

void ConstraintSet::merge(const ConstraintSet& o) {
    for (const Constraint& c : o.items_) add(c);
}

bool ConstraintSet::is_normal_form() const {
    for (const Constraint& c : items_) {
        bool ok = (!c.lhs.is_label() && c.lhs.bt == BT::S && c.rhs.is_label()) || // S <= l
                  (c.lhs.is_label() && !c.rhs.is_label() && c.rhs.bt == BT::D) || // l <= D
                  (c.lhs.is_label() && c.rhs.is_label());                         // l <= l~
        if (!ok) return false;
    }
    return true;
}

bool ConstraintSet::is_error_form() const {
    for (const Constraint& c : items_)
        if (!c.lhs.is_label() && !c.rhs.is_label() && c.lhs.bt == BT::D && c.rhs.bt == BT::S)
            return true;
    return false;
}

std::set<Label> ConstraintSet::labels() const {
    std::set<Label> out;
    for (const Constraint& c : items_) {
        if (c.lhs.is_label()) out.insert(c.lhs.lab);
        if (c.rhs.is_label()) out.insert(c.rhs.lab);
    }
    return out;
}

BTExpr apply_subst(const Substitution& s, const BTExpr& b) {
    if (!b.is_label()) return b;
    auto it = s.find(b.lab);
    return it == s.end() ? b : BTExpr::of(it->second);
}

// ---------------------------------------------------------------------------
// Labeling

namespace {

ExprPtr label_expr(const ExprPtr& e, const Label& l) {
    auto n = std::make_shared<Expr>(*e);
    n->label = l;
    for (size_t j = 0; j < n->kids.size(); ++j)
        n->kids[j] = label_expr(n->kids[j], l.child(static_cast<int>(j) + 1));
    return n;
}

EqPtr label_eqn(const EqPtr& s, const Label& l) {
    auto n = std::make_shared<Equation>(*s);
    n->label = l;
    switch (n->kind) {
        case EqKind::Directed:
        case EqKind::Undirected:
        case EqKind::Reset:
            n->lhs = label_expr(n->lhs, l.child(1));
            n->rhs = label_expr(n->rhs, l.child(2));
            break;
        case EqKind::Cond:
            n->guard = label_expr(n->guard, l.child(1));
            n->then_eq = label_eqn(n->then_eq, l.child(2));
            n->else_eq = label_eqn(n->else_eq, l.child(3));
            break;
        case EqKind::Family:
            n->binder = label_expr(n->binder, l.child(1));
            n->range = label_expr(n->range, l.child(2));
            n->body = label_eqn(n->body, l.child(3));
            break;
        case EqKind::Set:
            for (size_t j = 0; j < n->items.size(); ++j)
                n->items[j] = label_eqn(n->items[j], l.child(static_cast<int>(j) + 1));
            break;
    }
    return n;
}

} // namespace

EqPtr label_program(const EqPtr& root) { return label_eqn(root, Label{}); }

// ---------------------------------------------------------------------------
// Global environment

std::optional<Label> GlobalEnv::lookup(const Label& scope, const Variable& x) const {
    Label cur = scope;
    for (;;) {
        auto sc = scopes.find(cur);
        if (sc != scopes.end()) {
            auto it = sc->second.find(x);
            if (it != sc->second.end()) return it->second;
        }
        if (cur.is_root()) return std::nullopt;
        cur.path.pop_back();
    }
}

void build_global_env(const Label& scope, const EqPtr& s, GlobalEnv& rho) {
    switch (s->kind) {
        case EqKind::Directed: {
            auto& local = rho.scopes[scope];
            const Variable& x = s->lhs->var;
            auto [it, fresh] = local.emplace(x, s->lhs->label);
            if (!fresh)
                throw BtaError("DuplicateDefinition",
                               "'" + x.str() + "' is defined twice in the same scope", s->span);
            return;
        }
        case EqKind::Undirected:
        case EqKind::Reset:
            // no definitions
            return;
        case EqKind::Cond:
            rho.scopes.emplace(s->then_eq->label, std::map<Variable, Label>{});
            rho.scopes.emplace(s->else_eq->label, std::map<Variable, Label>{});
            build_global_env(s->then_eq->label, s->then_eq, rho);
            build_global_env(s->else_eq->label, s->else_eq, rho);
            return;
        case EqKind::Family:
            // the binder is registered only while generating constraints
            build_global_env(scope, s->body, rho);
            return;
        case EqKind::Set:
            for (const auto& it : s->items) build_global_env(scope, it, rho);
            return;
    }
}

GlobalEnv build_global_env(const EqPtr& labeled_root) {
    GlobalEnv rho;
    rho.scopes.emplace(Label{}, std::map<Variable, Label>{});
    build_global_env(Label{}, labeled_root, rho);
    return rho;
}

// ---------------------------------------------------------------------------
// Constraint generation

namespace {

void gen_expr(const ExprPtr& e, const Label& scope, const GlobalEnv& rho, ConstraintSet& out);

// the x' clause, unrolled over the prime chain; `l` is the occurrence label
void gen_var(const Variable& x, const Label& l, SourceSpan sp, const Label& scope,
             const GlobalEnv& rho, ConstraintSet& out) {
    auto def = [&](const Variable& v) {
        auto d = rho.lookup(scope, v);
        return d ? BTExpr::of(*d) : BTExpr::of(BT::D);
    };
    if (x.primes == 0) {
        out.add({def(x), BTExpr::of(l), sp});
        out.add({BTExpr::of(l), def(x), sp});
        return;
    }
    out.add({def(x), BTExpr::of(l), sp});            // definition flows into the occurrence
    Label sub = l.child(1);
    out.add({BTExpr::of(BT::D), BTExpr::of(sub), sp}); // the lower derivative is dynamic
    gen_var(x.lowered(), sub, sp, scope, rho, out);
}

void gen_expr(const ExprPtr& e, const Label& scope, const GlobalEnv& rho, ConstraintSet& out) {
    const Label& l = e->label;
    switch (e->kind) {
        case ExprKind::Const:
            out.add({BTExpr::of(l), BTExpr::of(BT::S), e->span});
            return;
        case ExprKind::Var:
            gen_var(e->var, l, e->span, scope, rho, out);
            return;
        case ExprKind::Apply:
            if (e->fn == "length") {
                // vector sizes are compile-time knowledge, so the result label
                // is not tied to the argument
                gen_expr(e->kids[0], scope, rho, out);
                return;
            }
            [[fallthrough]];
        case ExprKind::VectorLit:
        case ExprKind::Index:
        case ExprKind::TimeDer:
        case ExprKind::PartialDer:
            for (const auto& k : e->kids) {
                gen_expr(k, scope, rho, out);
                out.add({BTExpr::of(k->label), BTExpr::of(l), e->span});
            }
            return;
    }
}

void gen_eqn(const EqPtr& s, const Label& scope, const GlobalEnv& rho, ConstraintSet& out) {
    const Label& l = s->label;
    auto flow = [&](const Label& from) {
        out.add({BTExpr::of(from), BTExpr::of(l), s->span});
    };
    switch (s->kind) {
        case EqKind::Directed: {
            gen_expr(s->lhs, scope, rho, out);
            gen_expr(s->rhs, scope, rho, out);
            flow(s->lhs->label);
            flow(s->rhs->label);
            // the defining occurrence takes at least the right-hand side's time
            out.add({BTExpr::of(s->rhs->label), BTExpr::of(s->lhs->label), s->span});
            return;
        }
        case EqKind::Reset:
            gen_expr(s->rhs, scope, rho, out);
            flow(s->rhs->label);
            return;
        case EqKind::Undirected:
            gen_expr(s->lhs, scope, rho, out);
            gen_expr(s->rhs, scope, rho, out);
            flow(s->lhs->label);
            flow(s->rhs->label);
            return;
        case EqKind::Cond:
            gen_expr(s->guard, scope, rho, out);
            gen_eqn(s->then_eq, s->then_eq->label, rho, out);
            gen_eqn(s->else_eq, s->else_eq->label, rho, out);
            flow(s->guard->label);
            flow(s->then_eq->label);
            flow(s->else_eq->label);
            return;
        case EqKind::Family: {
            GlobalEnv rho2 = rho;
            rho2.scopes[scope][s->binder->var] = s->binder->label;
            gen_expr(s->binder, scope, rho2, out);
            gen_expr(s->range, scope, rho, out);
            gen_eqn(s->body, scope, rho2, out);
            // range flows into the binder; the body into the family
            out.add({BTExpr::of(s->range->label), BTExpr::of(s->binder->label), s->span});
            flow(s->body->label);
            return;
        }
        case EqKind::Set:
            for (const auto& it : s->items) {
                gen_eqn(it, scope, rho, out);
                flow(it->label);
            }
            return;
    }
}

} // namespace

ConstraintSet gen_constraints_expr(const ExprPtr& e, const Label& scope, const GlobalEnv& rho) {
    ConstraintSet out;
    gen_expr(e, scope, rho, out);
    return out;
}

ConstraintSet gen_constraints_eqn(const EqPtr& s, const Label& scope, const GlobalEnv& rho) {
    ConstraintSet out;
    gen_eqn(s, scope, rho, out);
    return out;
}

ConstraintSet gen_constraints(const EqPtr& labeled_root, const GlobalEnv& rho) {
    return gen_constraints_eqn(labeled_root, Label{}, rho);
}

// ---------------------------------------------------------------------------
// Normalization

namespace {

// rule that fires on c, or 0
char match_rule(const Constraint& c) {
    bool lc = !c.lhs.is_label(), rc = !c.rhs.is_label();
    if (lc && rc) {
        if (c.lhs.bt == BT::S && c.rhs.bt == BT::S) return 'a';
        if (c.lhs.bt == BT::S && c.rhs.bt == BT::D) return 'b';
        if (c.lhs.bt == BT::D && c.rhs.bt == BT::D) return 'c';
        return 0; // D <= S: error form, no rule
    }
    if (!lc && rc && c.rhs.bt == BT::S) return 'd';
    if (lc && !rc && c.lhs.bt == BT::D) return 'e';
    return 0;
}

} // namespace

NormalizeResult normalize(const ConstraintSet& c, bool record_trace) {
    NormalizeResult res;
    std::vector<Constraint> work = c.items();

    for (;;) {
        // deterministic scan: rules a..e, constraints in insertion order
        size_t pick = work.size();
        char rule = 0;
        for (char r : {'a', 'b', 'c', 'd', 'e'}) {
            for (size_t i = 0; i < work.size(); ++i) {
                if (match_rule(work[i]) == r) {
                    pick = i;
                    rule = r;
                    break;
                }
            }
            if (rule) break;
        }
        if (!rule) break;

        Constraint redex = work[pick];
        work.erase(work.begin() + static_cast<long>(pick));
        Substitution step;
        if (rule == 'd') step[redex.lhs.lab] = BT::S;
        if (rule == 'e') step[redex.rhs.lab] = BT::D;

        if (!step.empty()) {
            ConstraintSet rewritten;
            for (Constraint& w : work) {
                w.lhs = apply_subst(step, w.lhs);
                w.rhs = apply_subst(step, w.rhs);
                rewritten.add(w);
            }
            work = rewritten.items();
            // extension keeps the earlier binding on a collision; domains are
            // disjoint here because a substituted label never reappears
            for (auto& [l, b] : step) res.subst.emplace(l, b);
        }
        ++res.steps;
        if (record_trace) {
            RewriteStep st{rule, redex, step, work};
            res.trace.push_back(std::move(st));
        }
    }

    for (Constraint& w : work) res.residue.add(std::move(w));
    return res;
}

std::string BTAConflict::message() const {
    std::ostringstream os;
    os << "binding-time conflict: a compile-time value is forced to be dynamic";
    for (const Constraint& c : offending) {
        os << "\n  unsatisfiable: " << c.str();
        if (c.span.valid()) os << " (line " << c.span.line0 << ", col " << c.span.col0 << ")";
    }
    return os.str();
}

std::variant<Substitution, BTAConflict> minimal_solution(const ConstraintSet& c) {
    NormalizeResult n = normalize(c);
    if (n.residue.is_error_form()) {
        BTAConflict conflict;
        for (const Constraint& r : n.residue.items())
            if (!r.lhs.is_label() && !r.rhs.is_label() && r.lhs.bt == BT::D && r.rhs.bt == BT::S)
                conflict.offending.push_back(r);
        return conflict;
    }
    Substitution sigma = n.subst;
    for (const Label& l : n.residue.labels()) sigma.emplace(l, BT::S);
    return sigma;
}

// ---------------------------------------------------------------------------
// Annotation

namespace {

BT sigma_at(const Substitution& sigma, const Label& l) {
    auto it = sigma.find(l);
    return it == sigma.end() ? BT::S : it->second;
}

ExprPtr annotate_expr(const ExprPtr& e, const Substitution& sigma) {
    auto n = std::make_shared<Expr>(*e);
    n->bt = sigma_at(sigma, n->label);
    for (auto& k : n->kids) k = annotate_expr(k, sigma);
    return n;
}

EqPtr annotate_eqn(const EqPtr& s, const Substitution& sigma) {
    auto n = std::make_shared<Equation>(*s);
    n->bt = sigma_at(sigma, n->label);
    if (n->lhs) n->lhs = annotate_expr(n->lhs, sigma);
    if (n->rhs) n->rhs = annotate_expr(n->rhs, sigma);
    if (n->guard) n->guard = annotate_expr(n->guard, sigma);
    if (n->then_eq) n->then_eq = annotate_eqn(n->then_eq, sigma);
    if (n->else_eq) n->else_eq = annotate_eqn(n->else_eq, sigma);
    if (n->binder) n->binder = annotate_expr(n->binder, sigma);
    if (n->range) n->range = annotate_expr(n->range, sigma);
    if (n->body) n->body = annotate_eqn(n->body, sigma);
    for (auto& it : n->items) it = annotate_eqn(it, sigma);
    return n;
}

} // namespace

EqPtr annotate(const EqPtr& labeled, const Substitution& sigma) {
    return annotate_eqn(labeled, sigma);
}

// ---------------------------------------------------------------------------
// Declarative verification

namespace {

struct BTType {
    Type type;
    BT bt = BT::S;
    std::vector<BT> elem_bts; // fixed vectors: one entry per element
};

struct Verifier {
    const TypeEnv& types;
    const GlobalEnv& rho;
    const Substitution& sigma;
    std::vector<BtaViolation>* out;
    // family binders currently in scope
    std::map<Variable, BTType> binders;

    void violate(const SourceSpan& sp, const std::string& msg) { out->push_back({sp, msg}); }

    BT env_bt(const Label& scope, const Variable& x) const {
        auto b = binders.find(x);
        if (b != binders.end()) return b->second.bt;
        auto def = rho.lookup(scope, x);
        return def ? sigma_at(sigma, *def) : BT::D;
    }

    Type env_type(const Variable& x) const {
        auto b = binders.find(x);
        if (b != binders.end()) return b->second.type;
        auto it = types.find(x);
        return it == types.end() ? Type::real() : it->second;
    }

    static std::vector<BT> uniform(const Type& t, BT b) {
        size_t n = t.kind == Type::Kind::Vector ? t.elems.size() : 0;
        return std::vector<BT>(n, b);
    }

    BT node_bt(const ExprPtr& e) {
        if (!e->bt) {
            violate(e->span, "node has no binding-time annotation");
            return BT::D;
        }
        return *e->bt;
    }

    BTType expr(const ExprPtr& e, const Label& scope) {
        BT b = node_bt(e);
        switch (e->kind) {
            case ExprKind::Const: {
                // constants admit any annotation
                Type t = e->lit.kind == Constant::Kind::Nat    ? Type::nat()
                         : e->lit.kind == Constant::Kind::Bool ? Type::boolean()
                                                               : Type::real();
                return {t, b, {}};
            }
            case ExprKind::Var: {
                BT envb = env_bt(scope, e->var);
                if (envb != b)
                    violate(e->span, "'" + e->var.str() + "' is annotated " + bt_name(b) +
                                         " but the environment gives " + bt_name(envb));
                if (e->var.primes > 0) {
                    for (int k = 0; k < e->var.primes; ++k) {
                        Variable lower(e->var.base, k);
                        if (env_bt(scope, lower) != BT::D)
                            violate(e->span, "primed variable '" + e->var.str() + "' requires '" +
                                                 lower.str() + "' to be dynamic");
                    }
                }
                Type t = env_type(e->var);
                return {t, b, uniform(t, b)};
            }
            case ExprKind::VectorLit: {
                std::vector<BT> ebs;
                std::vector<Type> ets;
                BT join = BT::S;
                for (const auto& k : e->kids) {
                    BTType kt = expr(k, scope);
                    ebs.push_back(kt.bt);
                    ets.push_back(kt.type);
                    join = bt_join(join, kt.bt);
                }
                if (join != b)
                    violate(e->span, "vector annotation must be the join of its elements");
                return {Type::vector(std::move(ets)), b, std::move(ebs)};
            }
            case ExprKind::Index: {
                BTType target = expr(e->kids[0], scope);
                BTType index = expr(e->kids[1], scope);
                const ExprPtr& ie = e->kids[1];
                bool literal_static = ie->kind == ExprKind::Const &&
                                      ie->lit.kind == Constant::Kind::Nat && index.bt == BT::S;
                if (literal_static && target.type.kind == Type::Kind::Vector) {
                    long long i = ie->lit.value.num().fits_longlong()
                                      ? ie->lit.value.num().to_longlong()
                                      : -1;
                    if (i >= 0 && i < static_cast<long long>(target.elem_bts.size())) {
                        // two derivations apply here: the literal rule gives
                        // the element's binding time, the generic rule the
                        // join; a mixed vector literal can force the join
                        BT elem = target.elem_bts[static_cast<size_t>(i)];
                        BT join = bt_join(target.bt, index.bt);
                        if (b != elem && b != join)
                            violate(e->span, "static lookup must carry the element's binding time");
                        Type t = target.type.elems[static_cast<size_t>(i)];
                        return {t, b, uniform(t, b)};
                    }
                }
                BT want = bt_join(target.bt, index.bt);
                if (b != want)
                    violate(e->span, "indexing must join the vector and index binding times");
                Type t = target.type.is_vector() ? target.type.elems[0] : Type::real();
                return {t, b, uniform(t, b)};
            }
            case ExprKind::Apply: {
                std::vector<BTType> args;
                BT join = BT::S;
                for (const auto& k : e->kids) {
                    args.push_back(expr(k, scope));
                    join = bt_join(join, args.back().bt);
                }
                if (e->fn == "length") {
                    // shape information is static regardless of the elements
                    return {Type::nat(), b, {}};
                }
                if (b != join)
                    violate(e->span,
                            "'" + e->fn + "' must carry the join of its arguments' binding times");
                Type t = Type::real();
                const BuiltinInfo* info = builtin_info(e->fn);
                if (info && (info->comparison || info->logical)) t = Type::boolean();
                if (e->fn == ":") t = Type::vector_h(Type::nat());
                if (e->fn == "inv" || e->fn == "trans" || e->fn == "*") {
                    // matrix results keep a uniform binding time; precise shape
                    // is the type checker's business
                    if (!args.empty() && args[0].type.is_vector()) t = args[0].type;
                }
                return {t, b, uniform(t, b)};
            }
            case ExprKind::TimeDer: {
                BTType inner = expr(e->kids[0], scope);
                if (b != inner.bt)
                    violate(e->span, "time derivative must carry its operand's binding time");
                return {Type::real(), b, {}};
            }
            case ExprKind::PartialDer: {
                BTType of = expr(e->kids[0], scope);
                BTType wrt = expr(e->kids[1], scope);
                if (b != bt_join(of.bt, wrt.bt))
                    violate(e->span, "partial derivative must join its operands' binding times");
                return {Type::real(), b, {}};
            }
        }
        return {Type::real(), b, {}};
    }

    BT eqn(const EqPtr& s, const Label& scope) {
        BT b = s->bt ? *s->bt : BT::D;
        if (!s->bt) violate(s->span, "equation has no binding-time annotation");
        switch (s->kind) {
            case EqKind::Directed: {
                BTType lhs = expr(s->lhs, scope);
                BTType rhs = expr(s->rhs, scope);
                if (lhs.bt != rhs.bt || b != lhs.bt)
                    violate(s->span,
                            "directed equation requires one binding time on both sides");
                return b;
            }
            case EqKind::Reset: {
                // the reset target's own binding time is unconstrained: the
                // discrete-assignment rule takes it straight from the
                // environment, and the constraint table emits nothing for it
                BTType rhs = expr(s->rhs, scope);
                if (b != rhs.bt)
                    violate(s->span, "reset must carry the right-hand side's binding time");
                return b;
            }
            case EqKind::Undirected: {
                BTType l = expr(s->lhs, scope);
                BTType r = expr(s->rhs, scope);
                if (b != bt_join(l.bt, r.bt))
                    violate(s->span, "equation must join the binding times of its sides");
                return b;
            }
            case EqKind::Cond: {
                BTType g = expr(s->guard, scope);
                BT tb = eqn(s->then_eq, s->then_eq->label);
                BT eb = eqn(s->else_eq, s->else_eq->label);
                if (b != bt_join(g.bt, bt_join(tb, eb)))
                    violate(s->span, "conditional must join guard and branch binding times");
                return b;
            }
            case EqKind::Family: {
                BTType range = expr(s->range, scope);
                BT binder_bt = node_bt(s->binder);
                if (binder_bt != range.bt)
                    violate(s->binder->span, "family binder must carry the range's binding time");
                Type elem = range.type.is_vector() && !range.type.elems.empty()
                                ? range.type.elems[0]
                                : Type::nat();
                auto prev = binders.find(s->binder->var);
                std::optional<BTType> saved;
                if (prev != binders.end()) saved = prev->second;
                binders[s->binder->var] = {elem, binder_bt, {}};
                BT body = eqn(s->body, scope);
                if (saved)
                    binders[s->binder->var] = *saved;
                else
                    binders.erase(s->binder->var);
                if (b != body)
                    violate(s->span, "family must carry its body's binding time");
                return b;
            }
            case EqKind::Set: {
                BT join = BT::S;
                for (const auto& it : s->items) join = bt_join(join, eqn(it, scope));
                if (b != join)
                    violate(s->span, "equation set must join its members' binding times");
                return b;
            }
        }
        return b;
    }

    static std::string bt_name(BT b) { return b == BT::S ? "static" : "dynamic"; }
};

} // namespace

std::vector<BtaViolation> verify_annotation(const TypeEnv& types, const GlobalEnv& rho,
                                            const Substitution& sigma, const EqPtr& annotated) {
    std::vector<BtaViolation> out;
    Verifier v{types, rho, sigma, &out, {}};
    v.eqn(annotated, Label{});
    return out;
}

// ---------------------------------------------------------------------------
// Dump

// Top-level equations print bracketed when dynamic; the per-label table below
// carries the full fine-grained assignment.
std::string dump_bta(const EqPtr& annotated, const Substitution& sigma) {
    std::string out;
    std::vector<EqPtr> items =
        annotated->kind == EqKind::Set ? annotated->items : std::vector<EqPtr>{annotated};
    for (const auto& it : items) {
        bool dyn = it->bt && *it->bt == BT::D;
        if (dyn) out += "⟦";
        out += pretty(it);
        if (dyn) out += "⟧";
        out += "\n";
    }
    out += "--- substitution ---\n";
    for (const auto& [l, b] : sigma) {
        out += l.str();
        out += " -> ";
        out += b == BT::S ? "S" : "D";
        out += "\n";
    }
    return out;
}

} // namespace coredel
