#include "coredel/explicitizer.hpp"

#include <functional>
#include <random>
#include <sstream>

#include "coredel/numeric.hpp"
#include "coredel/parser.hpp"

namespace coredel {

// ---------------------------------------------------------------------------
// Unknown collection

namespace {

void scan_bases(const ExprPtr& e, std::vector<std::string>& order, std::set<std::string>& seen) {
    if (!e) return;
    if (e->kind == ExprKind::Var) {
        if (seen.insert(e->var.base).second) order.push_back(e->var.base);
        return;
    }
    for (const auto& k : e->kids) scan_bases(k, order, seen);
}

void scan_bases(const EqPtr& s, std::vector<std::string>& order, std::set<std::string>& seen) {
    if (!s) return;
    scan_bases(s->lhs, order, seen);
    scan_bases(s->rhs, order, seen);
    scan_bases(s->guard, order, seen);
    scan_bases(s->range, order, seen);
    if (s->then_eq) scan_bases(s->then_eq, order, seen);
    if (s->else_eq) scan_bases(s->else_eq, order, seen);
    if (s->body) scan_bases(s->body, order, seen);
    for (const auto& it : s->items) scan_bases(it, order, seen);
}

void max_order_into(const ExprPtr& e, std::map<std::string, int>& orders) {
    if (!e) return;
    if (e->kind == ExprKind::Var) {
        auto [it, fresh] = orders.emplace(e->var.base, e->var.primes);
        if (!fresh) it->second = std::max(it->second, e->var.primes);
        return;
    }
    for (const auto& k : e->kids) max_order_into(k, orders);
}

bool is_continuous(const EqPtr& s) {
    if (s->kind == EqKind::Undirected) return true;
    return s->kind == EqKind::Directed && s->lhs->var.primes > 0;
}

} // namespace

std::vector<Variable> collect_unknowns(const EqPtr& residual) {
    std::vector<std::string> base_order;
    std::set<std::string> seen;
    scan_bases(residual, base_order, seen);

    std::map<std::string, int> orders;
    for (const auto& s : residual->items) {
        if (!is_continuous(s)) continue;
        max_order_into(s->lhs, orders);
        max_order_into(s->rhs, orders);
    }

    std::vector<Variable> out;
    for (const std::string& base : base_order) {
        auto it = orders.find(base);
        if (it != orders.end() && it->second >= 1) out.push_back(Variable(base, it->second));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Linear system extraction

namespace {

ExprPtr subst_zero(const ExprPtr& e, const std::vector<Variable>& unknowns) {
    ExprPtr cur = e;
    for (const Variable& u : unknowns) cur = substitute(cur, u, mk_num(0));
    return cur;
}

std::mt19937& compile_rng() {
    // fixed seed: compilation must be deterministic
    static thread_local std::mt19937 rng(0x5eed5u);
    return rng;
}

} // namespace

LinearSystem extract_linear_system(const std::vector<ExprPtr>& rows,
                                   const std::vector<Variable>& unknowns,
                                   const std::vector<SourceSpan>& row_spans) {
    if (rows.size() != unknowns.size())
        throw ModelError("DimensionMismatch",
                         std::to_string(rows.size()) + " continuous equation(s) for " +
                             std::to_string(unknowns.size()) + " unknown(s)");
    LinearSystem sys;
    sys.unknowns = unknowns;
    sys.row_spans = row_spans.empty() ? std::vector<SourceSpan>(rows.size()) : row_spans;

    for (size_t i = 0; i < rows.size(); ++i) {
        std::vector<ExprPtr> coeffs;
        for (const Variable& u : unknowns) {
            ExprPtr a;
            try {
                a = partial_derivative(rows[i], u);
            } catch (const SpecError& err) {
                throw ModelError("NonlinearInUnknowns",
                                 std::string("equation cannot be checked for linearity: ") +
                                     err.what(),
                                 sys.row_spans[i]);
            }
            std::set<Variable> fv = free_vars(a);
            for (const Variable& v : unknowns)
                if (fv.count(v))
                    throw ModelError("NonlinearInUnknowns",
                                     "coefficient of " + u.str() + " still mentions " + v.str(),
                                     sys.row_spans[i]);
            coeffs.push_back(a);
        }
        sys.A.push_back(std::move(coeffs));
        sys.b.push_back(simplify(subst_zero(rows[i], unknowns)));
    }

    // reconstruction check: sum a_ij u_j + b_i == row_i at random points
    std::uniform_real_distribution<double> dist(-3.0, 3.0);
    std::set<Variable> vars;
    for (const ExprPtr& r : rows) {
        auto fv = free_vars(r);
        vars.insert(fv.begin(), fv.end());
    }
    for (int trial = 0; trial < 20; ++trial) {
        NumEnv env;
        for (const Variable& v : vars) env[v] = dist(compile_rng());
        for (size_t i = 0; i < rows.size(); ++i) {
            double lhs = eval_num(rows[i], env);
            double rec = eval_num(sys.b[i], env);
            for (size_t j = 0; j < unknowns.size(); ++j)
                rec += eval_num(sys.A[i][j], env) * env[unknowns[j]];
            double scale = std::max({1.0, std::fabs(lhs), std::fabs(rec)});
            if (std::fabs(lhs - rec) > 1e-9 * scale)
                throw ModelError("NonlinearInUnknowns",
                                 "equation is not affine in the unknowns", sys.row_spans[i]);
        }
    }
    return sys;
}

// ---------------------------------------------------------------------------
// Gaussian elimination

namespace {

ExprPtr expand_aux(ExprPtr e, const std::vector<std::pair<Variable, ExprPtr>>& aux) {
    // definitions may refer to earlier auxiliaries; substitute in reverse
    for (auto it = aux.rbegin(); it != aux.rend(); ++it) e = substitute(e, it->first, it->second);
    return e;
}

bool is_zero_const(const ExprPtr& e) {
    return e->kind == ExprKind::Const && e->lit.is_numeric() && e->lit.value.is_zero();
}

} // namespace

std::map<Variable, ExprPtr> gaussian_eliminate(
    const LinearSystem& sys, const Box& box,
    const std::vector<std::pair<Variable, ExprPtr>>& aux,
    std::vector<std::pair<ExprPtr, Interval>>* used_pivots) {
    size_t n = sys.unknowns.size();
    std::vector<std::vector<ExprPtr>> A = sys.A;
    std::vector<ExprPtr> b = sys.b;
    std::vector<bool> row_done(n, false), col_done(n, false);
    std::vector<std::pair<size_t, size_t>> pivots; // (row, col) in elimination order

    for (size_t step = 0; step < n; ++step) {
        // certified pivot with maximal mignitude; ties by lowest row, then column
        double best_mig = -1;
        size_t br = n, bc = n;
        ExprPtr best_uncertain;
        Interval best_uncertain_iv;
        for (size_t i = 0; i < n; ++i) {
            if (row_done[i]) continue;
            for (size_t j = 0; j < n; ++j) {
                if (col_done[j]) continue;
                if (is_zero_const(A[i][j])) continue;
                Interval iv = interval_eval(expand_aux(A[i][j], aux), box);
                if (iv.contains_zero()) {
                    if (!best_uncertain) {
                        best_uncertain = A[i][j];
                        best_uncertain_iv = iv;
                    }
                    continue;
                }
                if (iv.mignitude() > best_mig) {
                    best_mig = iv.mignitude();
                    br = i;
                    bc = j;
                }
            }
        }
        if (br == n) {
            std::string detail = "no pivot can be certified nonzero over the variable box";
            if (best_uncertain)
                detail += ": candidate " + pretty(best_uncertain) + " has interval " +
                          best_uncertain_iv.str();
            detail += "; tighten the ranges file to shrink the box";
            throw ModelError("PivotUncertain", detail,
                             sys.row_spans.empty() ? SourceSpan{} : sys.row_spans[0]);
        }
        if (used_pivots)
            used_pivots->push_back({A[br][bc], interval_eval(expand_aux(A[br][bc], aux), box)});

        for (size_t i = 0; i < n; ++i) {
            if (row_done[i] || i == br) continue;
            if (is_zero_const(A[i][bc])) continue;
            ExprPtr factor = simplify(mk_apply("/", {A[i][bc], A[br][bc]}));
            for (size_t j = 0; j < n; ++j) {
                if (col_done[j] || j == bc) continue;
                A[i][j] = simplify(
                    mk_apply("-", {A[i][j], mk_apply("*", {factor, A[br][j]})}));
            }
            b[i] = simplify(mk_apply("-", {b[i], mk_apply("*", {factor, b[br]})}));
            A[i][bc] = mk_num(0);
        }
        row_done[br] = true;
        col_done[bc] = true;
        pivots.push_back({br, bc});
    }

    // back-substitution in reverse pivot order
    std::map<Variable, ExprPtr> solution;
    for (size_t s = n; s-- > 0;) {
        auto [r, c] = pivots[s];
        ExprPtr acc = b[r];
        for (size_t t = s + 1; t < n; ++t) {
            size_t cl = pivots[t].second;
            if (is_zero_const(A[r][cl])) continue;
            acc = mk_apply("+", {acc, mk_apply("*", {A[r][cl], solution.at(sys.unknowns[cl])})});
        }
        ExprPtr num = mk_apply("*", {mk_const(Constant::real(Rational(-1))), acc});
        solution[sys.unknowns[c]] = simplify(mk_apply("/", {num, A[r][c]}));
    }

    // residual check: A u + b vanishes at sampled points
    std::set<Variable> vars;
    for (const auto& row : sys.A)
        for (const ExprPtr& e : row) {
            auto fv = free_vars(e);
            vars.insert(fv.begin(), fv.end());
        }
    for (const ExprPtr& e : sys.b) {
        auto fv = free_vars(e);
        vars.insert(fv.begin(), fv.end());
    }
    for (const auto& [v, def] : aux) {
        auto fv = free_vars(def);
        vars.insert(fv.begin(), fv.end());
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        NumEnv env;
        for (const Variable& v : vars) {
            Interval iv = box.lookup(v);
            double lo = std::max(iv.lo, -10.0), hi = std::min(iv.hi, 10.0);
            if (lo > hi) {
                lo = iv.lo;
                hi = iv.hi;
            }
            env[v] = lo + (hi - lo) * unit(compile_rng());
        }
        for (const auto& [v, def] : aux) env[v] = eval_num(expand_aux(def, aux), env);
        NumEnv full = env;
        for (const Variable& u : sys.unknowns)
            full[u] = eval_num(expand_aux(solution.at(u), aux), env);
        for (size_t i = 0; i < n; ++i) {
            double resid = eval_num(sys.b[i], full);
            double scale = std::max(1.0, std::fabs(resid));
            for (size_t j = 0; j < n; ++j) {
                double term = eval_num(sys.A[i][j], full) * full[sys.unknowns[j]];
                resid += term;
                scale = std::max(scale, std::fabs(term));
            }
            if (std::fabs(resid) > 1e-9 * scale)
                throw ModelError("EliminationCheck",
                                 "eliminated system does not satisfy the original equations",
                                 sys.row_spans.empty() ? SourceSpan{} : sys.row_spans[i]);
        }
    }
    return solution;
}

// ---------------------------------------------------------------------------
// Let-insertion of repeated trigonometric subterms

namespace {

void count_trig(const ExprPtr& e, const std::set<Variable>& unknowns,
                std::map<ExprPtr, int, ExprLess>& counts, std::vector<ExprPtr>& order) {
    if (!e) return;
    for (const auto& k : e->kids) count_trig(k, unknowns, counts, order);
    if (e->kind == ExprKind::Apply && (e->fn == "sin" || e->fn == "cos")) {
        for (const Variable& u : free_vars(e))
            if (unknowns.count(u)) return;
        auto [it, fresh] = counts.emplace(e, 1);
        if (fresh)
            order.push_back(e);
        else
            ++it->second;
    }
}

ExprPtr replace_expr(const ExprPtr& e, const ExprPtr& pattern, const ExprPtr& repl) {
    if (!e) return e;
    if (equal_expr(e, pattern)) return repl;
    if (e->kids.empty()) return e;
    bool changed = false;
    auto n = std::make_shared<Expr>(*e);
    for (auto& k : n->kids) {
        ExprPtr nk = replace_expr(k, pattern, repl);
        changed |= nk != k;
        k = nk;
    }
    return changed ? ExprPtr(n) : e;
}

std::string fresh_aux_name(std::set<std::string>& used) {
    for (char c = 'A'; c <= 'Z'; ++c) {
        std::string name(1, c);
        if (used.insert(name).second) return name;
    }
    for (int i = 1;; ++i) {
        std::string name = "S" + std::to_string(i);
        if (used.insert(name).second) return name;
    }
}

} // namespace

// ---------------------------------------------------------------------------
// Model construction

ExplicitModel build_explicit_model(const ResidualProgram& residual, const Box& box) {
    const EqPtr& prog = residual.program;
    ExplicitModel m;

    std::vector<ExprPtr> rows;
    std::vector<SourceSpan> row_spans;
    std::vector<std::pair<Variable, ExprPtr>> outputs;
    std::vector<const Equation*> conds;

    std::vector<Variable> unknowns = collect_unknowns(prog);
    std::set<Variable> unknown_set(unknowns.begin(), unknowns.end());

    for (const auto& s : prog->items) {
        switch (s->kind) {
            case EqKind::Directed: {
                const Variable& x = s->lhs->var;
                if (x.primes > 0) {
                    rows.push_back(simplify(mk_apply("-", {s->lhs, s->rhs})));
                    row_spans.push_back(s->span);
                    break;
                }
                if (s->rhs->kind == ExprKind::Const) {
                    if (s->rhs->lit.is_numeric()) m.parameters[x.str()] = s->rhs->lit.value;
                    // non-numeric static definitions were substituted away
                    break;
                }
                if (s->rhs->kind == ExprKind::VectorLit) break; // shape-only definition
                if (residual.output_vars.count(x)) outputs.push_back({x, s->rhs});
                break;
            }
            case EqKind::Undirected: {
                if (s->lhs->kind == ExprKind::Const && s->rhs->kind == ExprKind::Const) {
                    if (!(s->lhs->lit == s->rhs->lit))
                        throw ModelError("InconsistentEquation",
                                         "constant equation is never satisfied", s->span);
                    break; // trivially true
                }
                rows.push_back(simplify(mk_apply("-", {s->lhs, s->rhs})));
                row_spans.push_back(s->span);
                break;
            }
            case EqKind::Cond: conds.push_back(s.get()); break;
            case EqKind::Reset:
                throw ModelError("MixedModeError", "reset outside a conditional", s->span);
            case EqKind::Family:
                throw ModelError("MixedModeError", "family survived specialization", s->span);
            case EqKind::Set:
                throw ModelError("MixedModeError", "nested set survived specialization", s->span);
        }
    }

    // events: a conditional whose then-branch is all resets and whose
    // else-branch is empty; anything else mixes modes
    for (const Equation* c : conds) {
        EventSpec ev;
        ev.guard = c->guard;
        for (const auto& it : c->then_eq->items) {
            if (it->kind != EqKind::Reset)
                throw ModelError("MixedModeError",
                                 "conditional mixes resets with other equations", it->span);
            ev.resets.push_back({it->lhs->var, it->rhs});
        }
        if (!c->else_eq->items.empty())
            throw ModelError("MixedModeError", "else-branch resets are not supported",
                             c->else_eq->span);
        if (ev.resets.empty())
            throw ModelError("MixedModeError", "conditional carries no resets", c->span);
        m.events.push_back(std::move(ev));
    }

    // shared trig subterms become named auxiliaries
    std::set<std::string> used_names;
    {
        std::vector<std::string> order;
        std::set<std::string> seen;
        scan_bases(prog, order, seen);
        used_names = seen;
        for (const auto& [name, r] : m.parameters) {
            (void)r;
            used_names.insert(name);
        }
    }
    auto all_exprs = [&]() {
        std::vector<ExprPtr*> es;
        for (ExprPtr& r : rows) es.push_back(&r);
        for (EventSpec& ev : m.events) {
            es.push_back(&ev.guard);
            for (ResetSpec& rs : ev.resets) es.push_back(&rs.expr);
        }
        for (auto& [v, e] : outputs) {
            (void)v;
            es.push_back(&e);
        }
        return es;
    };
    for (;;) {
        std::map<ExprPtr, int, ExprLess> counts;
        std::vector<ExprPtr> order;
        for (ExprPtr* e : all_exprs()) count_trig(*e, unknown_set, counts, order);
        ExprPtr pick;
        for (const ExprPtr& cand : order)
            if (counts[cand] >= 2) {
                pick = cand;
                break;
            }
        if (!pick) break;
        Variable name(fresh_aux_name(used_names));
        for (ExprPtr* e : all_exprs()) *e = replace_expr(*e, pick, mk_var(name));
        m.auxiliaries.push_back({name, pick});
    }
    for (auto& [v, e] : outputs) m.auxiliaries.push_back({v, e});

    // solve for the highest derivatives
    LinearSystem sys = extract_linear_system(rows, unknowns, row_spans);
    std::map<Variable, ExprPtr> sol = gaussian_eliminate(sys, box, m.auxiliaries);
    for (const Variable& u : unknowns) m.odes.push_back({u, sol.at(u)});

    for (const Variable& u : unknowns)
        for (int k = 0; k < u.primes; ++k) m.state_vars.push_back(Variable(u.base, k));

    // validation: every variable the model mentions must be a state or an
    // auxiliary, ODE right-hand sides must not mention any unknown, resets
    // must target states
    std::set<Variable> allowed(m.state_vars.begin(), m.state_vars.end());
    for (const auto& [v, e] : m.auxiliaries) {
        (void)e;
        allowed.insert(v);
    }
    auto check_expr = [&](const ExprPtr& e, bool forbid_unknowns) {
        for (const Variable& v : free_vars(e)) {
            if (unknown_set.count(v)) {
                if (forbid_unknowns)
                    throw ModelError("IncompleteModel",
                                     "right-hand side mentions unknown " + v.str(), e->span);
                continue;
            }
            if (!allowed.count(v))
                throw ModelError("IncompleteModel",
                                 "'" + v.str() + "' has no defining equation", e->span);
        }
    };
    for (const auto& [v, e] : m.auxiliaries) {
        (void)v;
        check_expr(e, false);
    }
    for (const auto& [v, e] : m.odes) {
        (void)v;
        check_expr(e, true);
    }
    for (const EventSpec& ev : m.events) {
        check_expr(ev.guard, true);
        for (const ResetSpec& rs : ev.resets) {
            check_expr(rs.expr, true);
            if (!allowed.count(rs.var) || !std::count(m.state_vars.begin(), m.state_vars.end(), rs.var))
                throw ModelError("IncompleteModel",
                                 "reset targets '" + rs.var.str() + "', which is not a state",
                                 rs.expr->span);
        }
    }

    return m;
}

std::string dump_explicit(const ExplicitModel& m) {
    std::ostringstream os;
    os << "params:\n";
    for (const auto& [name, v] : m.parameters) os << "  " << name << " = " << v.to_string() << "\n";
    os << "aux:\n";
    for (const auto& [v, e] : m.auxiliaries) os << "  " << v.str() << " = " << pretty(e) << "\n";
    os << "odes:\n";
    for (const auto& [v, e] : m.odes) os << "  " << v.str() << " = " << pretty(e) << "\n";
    os << "events:\n";
    for (const EventSpec& ev : m.events) {
        os << "  when " << pretty(ev.guard) << ":";
        bool first = true;
        for (const ResetSpec& rs : ev.resets) {
            os << (first ? " " : ", ") << rs.var.str() << " += " << pretty(rs.expr);
            first = false;
        }
        os << "\n";
    }
    os << "states:";
    for (size_t i = 0; i < m.state_vars.size(); ++i)
        os << (i ? ", " : " ") << m.state_vars[i].str();
    os << "\n";
    return os.str();
}

} // namespace coredel
