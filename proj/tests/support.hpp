#pragma once

// shared helpers for the test suites: corpus paths, random generators for
// property tests, finite-difference oracles

#include <functional>
#include <random>
#include <string>

#include "coredel/pipeline.hpp"

namespace testsupport {

using namespace coredel;

inline std::string model_path(const std::string& name) {
    return std::string(COREDEL_MODELS_DIR) + "/" + name;
}

inline std::string read_model_file(const std::string& name) { return read_file(model_path(name)); }

inline Compilation compile_corpus(const std::string& name, const std::string& ranges = "") {
    Box box;
    if (!ranges.empty()) box = parse_ranges(read_file(model_path(ranges)), ranges);
    return compile_text(read_model_file(name), name, box);
}

// ---------------------------------------------------------------------------
// random expression/program generation

struct Gen {
    std::mt19937 rng;
    explicit Gen(unsigned seed) : rng(seed) {}

    int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); }
    double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
    bool chance(double p) { return std::uniform_real_distribution<double>(0, 1)(rng) < p; }

    // arithmetic expression over the given variables; smooth (no comparisons)
    ExprPtr arith(const std::vector<Variable>& vars, int depth) {
        if (depth <= 0 || pick(4) == 0) {
            if (!vars.empty() && chance(0.7)) return mk_var(vars[static_cast<size_t>(pick(
                static_cast<int>(vars.size())))]);
            long long n = pick(9) - 4;
            if (n >= 0 && chance(0.5)) return mk_num(n);
            return mk_rat(Rational(BigInt(n), BigInt(1 + pick(4))));
        }
        switch (pick(6)) {
            case 0: return mk_apply("+", {arith(vars, depth - 1), arith(vars, depth - 1)});
            case 1: return mk_apply("-", {arith(vars, depth - 1), arith(vars, depth - 1)});
            case 2: return mk_apply("*", {arith(vars, depth - 1), arith(vars, depth - 1)});
            case 3: return mk_apply("sin", {arith(vars, depth - 1)});
            case 4: return mk_apply("cos", {arith(vars, depth - 1)});
            default:
                return mk_apply("^", {arith(vars, depth - 1), mk_num(1 + pick(3))});
        }
    }
};

// central finite difference of f at x
inline double central_diff(const std::function<double(double)>& f, double x, double h = 1e-5) {
    return (f(x + h) - f(x - h)) / (2 * h);
}

// ---------------------------------------------------------------------------
// well-typed program generator for the type-safety fuzz: definitions are
// written in dependency order (no cycles), divisions have literal nonzero
// denominators, family ranges are static, and derivative operands stay in
// the smooth scalar fragment

struct ProgramGen {
    Gen g;
    explicit ProgramGen(unsigned seed) : g(seed) {}

    std::vector<Variable> state{Variable("x"), Variable("y"), Variable("x", 1),
                                Variable("y", 1)};

    ExprPtr smooth(const std::vector<Variable>& scope, int depth) {
        if (depth <= 0 || g.chance(0.3)) {
            if (g.chance(0.65))
                return mk_var(scope[static_cast<size_t>(g.pick(static_cast<int>(scope.size())))]);
            return g.chance(0.5) ? mk_num(g.pick(5))
                                 : mk_rat(Rational(BigInt(g.pick(19) - 9), BigInt(1 + g.pick(3))));
        }
        switch (g.pick(7)) {
            case 0: return mk_apply("+", {smooth(scope, depth - 1), smooth(scope, depth - 1)});
            case 1: return mk_apply("-", {smooth(scope, depth - 1), smooth(scope, depth - 1)});
            case 2: return mk_apply("*", {smooth(scope, depth - 1), smooth(scope, depth - 1)});
            case 3: return mk_apply("/", {smooth(scope, depth - 1), mk_num(1 + g.pick(4))});
            case 4: return mk_apply("sin", {smooth(scope, depth - 1)});
            case 5: return mk_apply("cos", {smooth(scope, depth - 1)});
            default: return mk_apply("^", {smooth(scope, depth - 1), mk_num(1 + g.pick(3))});
        }
    }

    ExprPtr expr(const std::vector<Variable>& scope, int depth) {
        switch (g.pick(8)) {
            case 0: {
                // vector with static lookup
                ExprPtr vec = mk_vector({smooth(scope, depth), smooth(scope, depth)});
                return mk_index(vec, mk_num(g.pick(2)));
            }
            case 1: return mk_time_der(smooth(scope, depth));
            case 2: {
                // target usually a variable, sometimes not (the tolerated error)
                ExprPtr target = g.chance(0.8)
                                     ? mk_var(scope[static_cast<size_t>(
                                           g.pick(static_cast<int>(scope.size())))])
                                     : smooth(scope, 1);
                return mk_partial_der(smooth(scope, depth), target);
            }
            default: return smooth(scope, depth);
        }
    }

    EqPtr program(int defs) {
        std::vector<EqPtr> items;
        std::vector<Variable> scope = state;
        for (int i = 0; i < defs; ++i) {
            int kind = g.pick(8);
            if (kind < 4) {
                Variable d("d" + std::to_string(i));
                items.push_back(mk_directed(mk_var(d), expr(scope, 2)));
                scope.push_back(d);
            } else if (kind == 4) {
                items.push_back(mk_undirected(
                    mk_apply("+", {expr(scope, 1), expr(scope, 1)}), expr(scope, 2)));
            } else if (kind == 5) {
                items.push_back(mk_reset(mk_var(state[0]), expr(scope, 2)));
            } else if (kind == 6) {
                ExprPtr guard =
                    g.chance(0.5)
                        ? mk_apply(">", {mk_num(g.pick(3)), mk_num(g.pick(3))})
                        : mk_apply(">", {smooth(scope, 1), smooth(scope, 1)});
                EqPtr t = mk_set({mk_reset(mk_var(state[0]), expr(scope, 1))});
                EqPtr e = mk_set({});
                items.push_back(mk_cond(guard, t, e));
            } else {
                Variable binder("i" + std::to_string(i));
                // ranges must be homogeneous: a literal span of naturals, or
                // a vector of state variables looked up syntactically
                ExprPtr range =
                    g.chance(0.5)
                        ? mk_apply(":", {mk_num(0), mk_num(1 + g.pick(2))})
                        : mk_vector({mk_var(state[0]), mk_var(state[1])});
                std::vector<Variable> inner = scope;
                inner.push_back(binder);
                items.push_back(mk_family(mk_var(binder), range,
                                          mk_undirected(mk_apply("+", {expr(inner, 1), expr(inner, 1)}),
                                                        expr(inner, 1))));
            }
        }
        return mk_set(std::move(items));
    }
};

} // namespace testsupport
