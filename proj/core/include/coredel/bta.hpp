#pragma once

#include <optional>
#include <variant>

#include "coredel/ast.hpp"
#include "coredel/errors.hpp"
#include "coredel/parser.hpp"
#include "coredel/typecheck.hpp"

namespace coredel {

// ---------------------------------------------------------------------------
// Constraints

// binding time or label
struct BTExpr {
    enum class Kind { Const, Lab };
    Kind kind = Kind::Const;
    BT bt = BT::S;
    Label lab;

    static BTExpr of(BT b) { return {Kind::Const, b, {}}; }
    static BTExpr of(Label l) { return {Kind::Lab, BT::S, std::move(l)}; }

    bool is_label() const { return kind == Kind::Lab; }
    bool operator==(const BTExpr& o) const {
        if (kind != o.kind) return false;
        return kind == Kind::Const ? bt == o.bt : lab == o.lab;
    }
    bool operator<(const BTExpr& o) const {
        if (kind != o.kind) return kind < o.kind;
        return kind == Kind::Const ? bt < o.bt : lab < o.lab;
    }
    std::string str() const;
};

// lhs is below-or-equal rhs
struct Constraint {
    BTExpr lhs, rhs;
    SourceSpan span{}; // node that generated the constraint

    bool operator==(const Constraint& o) const { return lhs == o.lhs && rhs == o.rhs; }
    bool operator<(const Constraint& o) const {
        if (!(lhs == o.lhs)) return lhs < o.lhs;
        return rhs < o.rhs;
    }
    std::string str() const;
};

// insertion-ordered, duplicate-free
class ConstraintSet {
public:
    void add(Constraint c);
    void merge(const ConstraintSet& o);

    const std::vector<Constraint>& items() const { return items_; }
    size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }

    bool is_normal_form() const;
    bool is_error_form() const;
    std::set<Label> labels() const;

private:
    std::vector<Constraint> items_;
    std::set<Constraint> seen_;
};

using Substitution = std::map<Label, BT>; // identity outside its domain

BTExpr apply_subst(const Substitution& s, const BTExpr& b);

// ---------------------------------------------------------------------------
// Labeling and the global environment

// Assign each node a unique label: the root Set is `root`, child k of a node
// labeled l is l.k (1-based). Returns a relabeled copy.
EqPtr label_program(const EqPtr& root);

struct GlobalEnv {
    // scope label -> per-scope definition sites
    std::map<Label, std::map<Variable, Label>> scopes;

    // walk from `scope` through enclosing scopes up to root; nullopt means
    // the variable is runtime state (dynamic)
    std::optional<Label> lookup(const Label& scope, const Variable& x) const;
};

// labelE: fold one labeled equation into rho under `scope`.
// Throws BtaError("DuplicateDefinition") on a second directed definition of
// the same variable in one scope.
void build_global_env(const Label& scope, const EqPtr& s, GlobalEnv& rho);

// whole labeled program, starting from {root -> {}}
GlobalEnv build_global_env(const EqPtr& labeled_root);

// ---------------------------------------------------------------------------
// Constraint generation (one clause per syntax form)

ConstraintSet gen_constraints_expr(const ExprPtr& e, const Label& scope, const GlobalEnv& rho);
ConstraintSet gen_constraints_eqn(const EqPtr& s, const Label& scope, const GlobalEnv& rho);
ConstraintSet gen_constraints(const EqPtr& labeled_root, const GlobalEnv& rho);

// ---------------------------------------------------------------------------
// Normalization

struct RewriteStep {
    char rule;                 // 'a'..'e'
    Constraint redex;
    Substitution subst;        // empty for a/b/c
    std::vector<Constraint> after; // recorded only when tracing
};

struct NormalizeResult {
    Substitution subst;    // left-to-right extension of the per-step substitutions
    ConstraintSet residue; // normal form or error form
    std::vector<RewriteStep> trace;
    size_t steps = 0;
};

NormalizeResult normalize(const ConstraintSet& c, bool record_trace = false);

struct BTAConflict {
    std::vector<Constraint> offending; // D below-S constraints with spans
    std::string message() const;
};

// Normalize, then map every remaining label to S. The result solves the set,
// has domain labels(C), and is pointwise minimal.
std::variant<Substitution, BTAConflict> minimal_solution(const ConstraintSet& c);

// ---------------------------------------------------------------------------
// Annotation

// σ must cover the labels of p; unconstrained labels default to S
EqPtr annotate(const EqPtr& labeled, const Substitution& sigma);

struct BtaViolation {
    SourceSpan span;
    std::string message;
};

// Check an annotated program against the declarative two-level rules. Serves
// as the soundness oracle for minimal_solution.
std::vector<BtaViolation> verify_annotation(const TypeEnv& types, const GlobalEnv& rho,
                                            const Substitution& sigma, const EqPtr& annotated);

// `--dump bta` text: dynamic parts bracketed, then `label -> S|D` lines
std::string dump_bta(const EqPtr& annotated, const Substitution& sigma);

} // namespace coredel
