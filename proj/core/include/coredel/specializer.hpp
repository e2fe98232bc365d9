#pragma once

#include "coredel/ast.hpp"
#include "coredel/errors.hpp"

namespace coredel {

// ---------------------------------------------------------------------------
// Values

// A static constant, a residual (dynamic) expression, or a vector of values.
struct Value {
    enum class Kind { Const, Residual, Vector };
    Kind kind = Kind::Const;
    Constant c;
    ExprPtr residual;
    std::vector<Value> elems;
    BT bt = BT::S;

    static Value of_const(Constant k, BT b = BT::S) {
        Value v;
        v.kind = Kind::Const;
        v.c = std::move(k);
        v.bt = b;
        return v;
    }
    static Value of_residual(ExprPtr e) {
        Value v;
        v.kind = Kind::Residual;
        v.residual = std::move(e);
        v.bt = BT::D;
        return v;
    }
    static Value of_vector(std::vector<Value> es) {
        Value v;
        v.kind = Kind::Vector;
        v.elems = std::move(es);
        v.bt = BT::S;
        for (const Value& e : v.elems) v.bt = bt_join(v.bt, e.bt);
        return v;
    }

    bool is_static_const() const { return kind == Kind::Const; }
};

ExprPtr value_to_expr(const Value& v);

// ---------------------------------------------------------------------------
// Static function application

struct StaticApplyResult {
    bool folded = true;
    Constant value; // meaningful when folded
};

// Exact rational/boolean evaluation of a builtin over constants. Trigonometry
// of a nonzero argument and any arithmetic touching pi cannot be represented
// exactly and asks the caller to residualize instead. Throws SpecError with
// kinds DivisionByZero / ArityError.
StaticApplyResult static_apply(const std::string& fn, const std::vector<Constant>& args,
                               SourceSpan span = {});

// ---------------------------------------------------------------------------
// Symbolic differentiation (chain rule) and simplification

// d/dt: constants to 0, x to x', builtins via their partial-derivative
// tables. Throws SpecError(NonDifferentiable) on boolean/comparison builtins
// and residual forms with no rule. Result is simplified.
ExprPtr time_derivative(const ExprPtr& e);

// d/dx with primes significant (x' and x are independent coordinates).
ExprPtr partial_derivative(const ExprPtr& e, const Variable& x);

// Terminating rewrite to a canonical sum-of-monomials form: exact constant
// folding, neutral/absorbing element removal, flattening, and combination of
// rational coefficients of equal monomials. Semantics-preserving.
ExprPtr simplify(const ExprPtr& e);

// ---------------------------------------------------------------------------
// Specialization

// Evaluate an annotated expression to a value; `defs` carries the values of
// already-processed directed definitions. Throws SpecError.
Value specialize_expr(const ExprPtr& e, const std::map<Variable, Value>& defs);

struct ResidualProgram {
    // residual equations (a Set); families and partial derivatives are gone,
    // static subterms are folded, right-hand sides are value expressions
    EqPtr program;
    // scalar directed definitions that nothing in the dynamics consumes;
    // these are the model's observable outputs
    std::set<Variable> output_vars;
};

// Big-step specialization of a verified annotated program. Directed
// equations are processed in dependency order and their values substituted
// into everything that follows; families unroll over their (static) ranges;
// conditionals with static guards select a branch.
ResidualProgram specialize_program(const EqPtr& annotated);

// true when the residual contains no Family and no PartialDer node
bool residual_pure(const EqPtr& s);

} // namespace coredel
