#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "coredel/rational.hpp"

namespace coredel {

// ---------------------------------------------------------------------------
// Source positions

struct SourceSpan {
    int line0 = 0, col0 = 0; // start (1-based; 0 = synthetic node)
    int line1 = 0, col1 = 0; // end, inclusive
    bool valid() const { return line0 > 0; }
};

// ---------------------------------------------------------------------------
// Binding times and labels

enum class BT { S, D };

// b1 is below-or-equal b2 in the S < D order
inline bool bt_le(BT a, BT b) { return a == BT::S || b == BT::D; }
inline BT bt_join(BT a, BT b) { return (a == BT::D || b == BT::D) ? BT::D : BT::S; }

// Program-point label: a path of 1-based child indices from the root.
struct Label {
    std::vector<int> path;

    Label child(int i) const {
        Label l = *this;
        l.path.push_back(i);
        return l;
    }
    bool is_root() const { return path.empty(); }
    bool operator==(const Label& o) const { return path == o.path; }
    bool operator<(const Label& o) const { return path < o.path; }
    std::string str() const;
};

// ---------------------------------------------------------------------------
// Variables, constants, types

struct Variable {
    std::string base;
    int primes = 0;

    Variable() = default;
    Variable(std::string b, int p = 0) : base(std::move(b)), primes(p) {}

    Variable derived() const { return Variable(base, primes + 1); } // one more prime
    Variable lowered() const { return Variable(base, primes - 1); } // precondition primes > 0

    bool operator==(const Variable& o) const { return base == o.base && primes == o.primes; }
    bool operator!=(const Variable& o) const { return !(*this == o); }
    bool operator<(const Variable& o) const {
        return base != o.base ? base < o.base : primes < o.primes;
    }
    std::string str() const { return base + std::string(primes, '\''); }
};

struct Constant {
    enum class Kind { Nat, Real, Bool, Pi };
    Kind kind = Kind::Nat;
    Rational value; // Nat/Real
    bool bval = false;

    static Constant nat(Rational v) { return {Kind::Nat, std::move(v), false}; }
    static Constant real(Rational v) { return {Kind::Real, std::move(v), false}; }
    static Constant boolean(bool b) { return {Kind::Bool, Rational(), b}; }
    static Constant pi() { return {Kind::Pi, Rational(), false}; }

    bool is_numeric() const { return kind == Kind::Nat || kind == Kind::Real; }
    bool operator==(const Constant& o) const;
};

struct Type {
    enum class Kind { Nat, Bool, Real, Vector, VectorH };
    Kind kind = Kind::Real;
    std::vector<Type> elems; // Vector: fixed arity >= 1; VectorH: exactly one element type

    static Type nat() { return {Kind::Nat, {}}; }
    static Type boolean() { return {Kind::Bool, {}}; }
    static Type real() { return {Kind::Real, {}}; }
    static Type vector(std::vector<Type> e) { return {Kind::Vector, std::move(e)}; }
    // homogeneous vector of statically unknown arity (ranges a:b)
    static Type vector_h(Type e) { return {Kind::VectorH, {std::move(e)}}; }

    bool is_vector() const { return kind == Kind::Vector || kind == Kind::VectorH; }
    bool operator==(const Type& o) const;
    bool operator!=(const Type& o) const { return !(*this == o); }
    std::string str() const;
};

// nat is usable where real is expected
bool type_assignable(const Type& from, const Type& to);

using TypeEnv = std::map<Variable, Type>;

// ---------------------------------------------------------------------------
// Expressions

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

enum class ExprKind { Const, Var, VectorLit, Index, Apply, TimeDer, PartialDer };

struct Expr {
    ExprKind kind;
    Constant lit;              // Const
    Variable var;              // Var
    std::string fn;            // Apply
    std::vector<ExprPtr> kids; // VectorLit elements / Index {target, index} /
                               // Apply args / TimeDer {e} / PartialDer {of, wrt}
    SourceSpan span{};
    Label label{};              // meaningful only after labeling
    std::optional<BT> bt{};     // meaningful only after annotation
};

ExprPtr mk_const(Constant c, SourceSpan sp = {});
ExprPtr mk_var(Variable v, SourceSpan sp = {});
ExprPtr mk_vector(std::vector<ExprPtr> elems, SourceSpan sp = {});
ExprPtr mk_index(ExprPtr target, ExprPtr index, SourceSpan sp = {});
ExprPtr mk_apply(std::string fn, std::vector<ExprPtr> args, SourceSpan sp = {});
ExprPtr mk_time_der(ExprPtr e, SourceSpan sp = {});
ExprPtr mk_partial_der(ExprPtr of, ExprPtr wrt, SourceSpan sp = {});

// convenience constants
ExprPtr mk_num(long long v);            // nat if v >= 0, real otherwise
ExprPtr mk_rat(const Rational& v);      // real-kinded rational

// ---------------------------------------------------------------------------
// Equations

struct Equation;
using EqPtr = std::shared_ptr<const Equation>;

enum class EqKind { Directed, Undirected, Reset, Cond, Family, Set };

struct Equation {
    EqKind kind;
    ExprPtr lhs;               // Directed/Reset: a Var node; Undirected: any expr
    ExprPtr rhs;               // Directed/Undirected/Reset
    ExprPtr guard;             // Cond
    EqPtr then_eq, else_eq;    // Cond (always Set nodes)
    ExprPtr binder;            // Family: an unprimed Var node
    ExprPtr range;             // Family
    EqPtr body;                // Family
    std::vector<EqPtr> items;  // Set
    SourceSpan span{};
    Label label{};
    std::optional<BT> bt{};
};

EqPtr mk_directed(ExprPtr lhs_var, ExprPtr rhs, SourceSpan sp = {});
EqPtr mk_undirected(ExprPtr lhs, ExprPtr rhs, SourceSpan sp = {});
EqPtr mk_reset(ExprPtr lhs_var, ExprPtr rhs, SourceSpan sp = {});
EqPtr mk_cond(ExprPtr guard, EqPtr then_eq, EqPtr else_eq, SourceSpan sp = {});
EqPtr mk_family(ExprPtr binder, ExprPtr range, EqPtr body, SourceSpan sp = {});
EqPtr mk_set(std::vector<EqPtr> items, SourceSpan sp = {});

// ---------------------------------------------------------------------------
// Structural utilities

// total order / equality on erased structure (spans, labels and binding-time
// annotations are ignored)
int cmp_expr(const ExprPtr& a, const ExprPtr& b);
int cmp_eq(const EqPtr& a, const EqPtr& b);
bool equal_expr(const ExprPtr& a, const ExprPtr& b);
bool equal_eq(const EqPtr& a, const EqPtr& b);

struct ExprLess {
    bool operator()(const ExprPtr& a, const ExprPtr& b) const { return cmp_expr(a, b) < 0; }
};

std::set<Variable> free_vars(const ExprPtr& e);
std::set<Variable> free_vars(const EqPtr& s);
std::set<Variable> left_vars(const EqPtr& s);

// capture-avoiding substitution of every free occurrence of x by v
ExprPtr substitute(const ExprPtr& e, const Variable& x, const ExprPtr& v);
EqPtr substitute(const EqPtr& s, const Variable& x, const ExprPtr& v);

// drop labels and binding-time annotations, keep structure and spans
ExprPtr erase(const ExprPtr& e);
EqPtr erase(const EqPtr& s);

// ---------------------------------------------------------------------------
// Builtins

// classification used by the type checker, constraint generator, specializer
// and differentiator
struct BuiltinInfo {
    int arity;           // -1: special (range/matrix forms resolved in the checker)
    bool arithmetic;     // participates in rational constant folding
    bool comparison;     // > >= == !=
    bool logical;        // && ||
    bool differentiable; // has a d/darg rule
    bool structural;     // evaluated over vector shapes at specialization time
};

const BuiltinInfo* builtin_info(const std::string& fn);

} // namespace coredel
