#include "coredel/numeric.hpp"

#include <cmath>

namespace coredel {

double eval_num(const ExprPtr& e, const NumEnv& env) {
    switch (e->kind) {
        case ExprKind::Const:
            switch (e->lit.kind) {
                case Constant::Kind::Nat:
                case Constant::Kind::Real: return e->lit.value.to_double();
                case Constant::Kind::Pi: return M_PI;
                case Constant::Kind::Bool:
                    throw EvalError("EvalKind", "boolean constant in numeric context", e->span);
            }
            break;
        case ExprKind::Var: {
            auto it = env.find(e->var);
            if (it == env.end())
                throw EvalError("EvalUnbound", "no value for '" + e->var.str() + "'", e->span);
            return it->second;
        }
        case ExprKind::Apply: {
            const std::string& fn = e->fn;
            if (fn == "sin") return std::sin(eval_num(e->kids[0], env));
            if (fn == "cos") return std::cos(eval_num(e->kids[0], env));
            double a = eval_num(e->kids[0], env);
            if (fn == "+") return a + eval_num(e->kids[1], env);
            if (fn == "-") return a - eval_num(e->kids[1], env);
            if (fn == "*") return a * eval_num(e->kids[1], env);
            if (fn == "/") return a / eval_num(e->kids[1], env);
            if (fn == "^") return std::pow(a, eval_num(e->kids[1], env));
            throw EvalError("EvalKind", "'" + fn + "' is not numeric", e->span);
        }
        default: break;
    }
    throw EvalError("EvalKind", "expression has no numeric value", e->span);
}

bool eval_bool(const ExprPtr& e, const NumEnv& env) {
    if (e->kind == ExprKind::Const && e->lit.kind == Constant::Kind::Bool) return e->lit.bval;
    if (e->kind == ExprKind::Apply) {
        const std::string& fn = e->fn;
        if (fn == "&&") return eval_bool(e->kids[0], env) && eval_bool(e->kids[1], env);
        if (fn == "||") return eval_bool(e->kids[0], env) || eval_bool(e->kids[1], env);
        if (fn == ">") return eval_num(e->kids[0], env) > eval_num(e->kids[1], env);
        if (fn == ">=") return eval_num(e->kids[0], env) >= eval_num(e->kids[1], env);
        if (fn == "==" || fn == "!=") {
            bool eq;
            const ExprPtr& a = e->kids[0];
            if ((a->kind == ExprKind::Const && a->lit.kind == Constant::Kind::Bool))
                eq = eval_bool(e->kids[0], env) == eval_bool(e->kids[1], env);
            else
                eq = eval_num(e->kids[0], env) == eval_num(e->kids[1], env);
            return fn == "==" ? eq : !eq;
        }
    }
    throw EvalError("EvalKind", "expression has no boolean value", e->span);
}

} // namespace coredel
