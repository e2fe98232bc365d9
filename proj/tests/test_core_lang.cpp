#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "coredel/bta.hpp"
#include "coredel/parser.hpp"
#include "coredel/typecheck.hpp"
#include "support.hpp"

using namespace coredel;

namespace {

ExprPtr pe(const std::string& s) {
    ParsedProgram p = parse("w_ = " + s);
    return p.root->items[0]->rhs;
}

Type tc(const TypeEnv& env, const std::string& s) { return type_check_expr(env, pe(s)); }

std::string tc_err(const TypeEnv& env, const std::string& s) {
    try {
        type_check_expr(env, pe(s));
    } catch (const TypeError& e) {
        return e.code();
    }
    return "";
}

} // namespace

TEST_CASE("literal typing") {
    TypeEnv env;
    CHECK(tc(env, "3") == Type::nat());
    CHECK(tc(env, "3.5") == Type::real());
    CHECK(tc(env, "true") == Type::boolean());
    CHECK(tc(env, "pi") == Type::real());
}

TEST_CASE("primed variables need the whole real chain") {
    TypeEnv env{{Variable("x"), Type::real()}, {Variable("x", 1), Type::real()}};
    CHECK(tc(env, "x'") == Type::real());
    CHECK(tc_err(env, "y") == "UnboundVariable");
    TypeEnv missing{{Variable("x", 1), Type::real()}};
    CHECK(tc_err(missing, "x'") == "MissingUnprimedBinding");
    TypeEnv wrong{{Variable("x"), Type::nat()}, {Variable("x", 1), Type::real()}};
    CHECK(tc_err(wrong, "x'") == "TypeMismatch");
}

TEST_CASE("literal index picks the element type of a heterogeneous vector") {
    TypeEnv env;
    CHECK(tc(env, "(1, true)(0)") == Type::nat());
    CHECK(tc(env, "(1, true)(1)") == Type::boolean());
    CHECK(tc_err(env, "(1, true)(2)") == "IndexOutOfBounds");
    // non-literal index requires a homogeneous vector
    TypeEnv n{{Variable("n"), Type::nat()}};
    CHECK(tc_err(n, "(1, true)(n)") == "TypeMismatch");
    CHECK(tc(n, "(1, 2)(n)") == Type::nat());
}

TEST_CASE("builtin typing") {
    TypeEnv env{{Variable("x"), Type::real()}};
    CHECK(tc_err(env, "sin(true)") == "TypeMismatch");
    CHECK(tc(env, "1 + 2") == Type::nat());
    CHECK(tc(env, "1 + x") == Type::real());
    CHECK(tc(env, "1/2") == Type::real());
    CHECK(tc(env, "x^2") == Type::real());
    CHECK(tc_err(env, "x^x") == "TypeMismatch"); // exponent must be nat
    CHECK(tc(env, "x > 1") == Type::boolean());
    CHECK(tc_err(env, "x && true") == "TypeMismatch");
    CHECK(tc_err(env, "sin(1, 2)") == "ArityMismatch");
    CHECK(tc(env, "0:3") == Type::vector_h(Type::nat()));
    CHECK(tc(env, "length((x, x))") == Type::nat());
    CHECK(tc(env, "trans((x, x))") ==
          Type::vector({Type::vector({Type::real()}), Type::vector({Type::real()})}));
}

TEST_CASE("matrix typing") {
    TypeEnv env{{Variable("c"), Type::real()}};
    // 2x2 times 2x1 collapses to a flat pair
    CHECK(tc(env, "inv(((c, 1.0), (1.0, c))) * ((c, c), (c, c)) * trans((c, c))") ==
          Type::vector({Type::real(), Type::real()}));
    CHECK(tc_err(env, "inv((c, c))") == "TypeMismatch");
    CHECK(tc_err(env, "((1.0, 2.0), (3.0, 4.0)) * (c, c, c)") == "TypeMismatch");
}

TEST_CASE("equation checking") {
    ParsedProgram ok = parse("x' = 1.0");
    TypeEnv env{{Variable("x"), Type::real()}, {Variable("x", 1), Type::real()}};
    CHECK_NOTHROW(type_check_eqn(env, ok.root));

    ParsedProgram guard = parse("if 1 then {} else {}");
    try {
        type_check_eqn({}, guard.root);
        CHECK(false);
    } catch (const TypeError& e) {
        CHECK(e.code() == "GuardNotBool");
    }

    ParsedProgram pend = parse(testsupport::read_model_file("pendulum.cdl"), "pendulum.cdl");
    TypeEnv penv = infer_env(pend.root);
    CHECK_NOTHROW(type_check_eqn(penv, pend.root));
    CHECK(penv.at(Variable("q")) == Type::vector({Type::real(), Type::real()}));
    CHECK(penv.at(Variable("I")) == Type::real());
    CHECK(penv.at(Variable("a")) == Type::nat());
}

TEST_CASE("free variables") {
    CHECK(free_vars(pe("x")) == std::set<Variable>{Variable("x")});
    CHECK(free_vars(pe("7")).empty());
    // partial derivative of a primed variable, built directly
    ExprPtr e = mk_apply("*", {mk_partial_der(mk_var(Variable("x", 1)), mk_var(Variable("t"))),
                               mk_var(Variable("t", 1))});
    CHECK(free_vars(e) ==
          std::set<Variable>{Variable("x", 1), Variable("t"), Variable("t", 1)});
    // and the concrete syntax form, where the prime belongs to the bracket
    CHECK(free_vars(pe("x'[t]*t'")) ==
          std::set<Variable>{Variable("x"), Variable("t"), Variable("t", 1)});
}

TEST_CASE("left variables") {
    CHECK(left_vars(parse("x = 1").root) == std::set<Variable>{Variable("x")});
    CHECK(left_vars(parse("x = 1, y = 2").root) ==
          std::set<Variable>{Variable("x"), Variable("y")});
    CHECK(left_vars(parse("x + y = 2").root).empty());
    CHECK(left_vars(parse("x += 1").root).empty());
    CHECK(left_vars(parse("if c > 0 then a = 1 else b = 2").root) ==
          std::set<Variable>{Variable("a"), Variable("b")});
    CHECK(left_vars(parse("foreach i in (1, 2) do z = i").root) ==
          std::set<Variable>{Variable("z")});
}

TEST_CASE("substitution") {
    ExprPtr two = mk_num(2);
    CHECK(equal_expr(substitute(pe("x + y"), Variable("x"), two), pe("2 + y")));

    // family binders shadow
    EqPtr fam = parse("foreach x in e do x = 1").root->items[0];
    EqPtr sub = substitute(fam, Variable("x"), two);
    CHECK(equal_eq(sub->body, fam->body));

    // capture avoidance: substituting an expression that mentions the binder
    EqPtr fam2 = parse("foreach i in (1, 2) do z = i + w").root->items[0];
    EqPtr sub2 = substitute(fam2, Variable("w"), mk_var(Variable("i")));
    CHECK(sub2->binder->var != Variable("i"));
    auto fv = free_vars(sub2);
    CHECK(fv.count(Variable("i"))); // the outer i stays free
}

TEST_CASE("substitution preserves typing on generated terms") {
    testsupport::Gen g(314);
    std::vector<Variable> vars{Variable("x"), Variable("y")};
    TypeEnv env{{Variable("x"), Type::real()}, {Variable("y"), Type::real()}};
    for (int i = 0; i < 200; ++i) {
        ExprPtr e = g.arith(vars, 3);
        ExprPtr v = g.arith({Variable("y")}, 2);
        Type t1 = type_check_expr(env, e);
        ExprPtr subbed = substitute(e, Variable("x"), v);
        Type t2 = type_check_expr(env, subbed);
        // nat may widen to real when the substituted value is real-typed
        CHECK(type_assignable(t1, t2));

        auto fv_sub = free_vars(subbed);
        auto fv_e = free_vars(e);
        auto fv_v = free_vars(v);
        for (const Variable& x : fv_sub) {
            bool ok = (fv_e.count(x) && x != Variable("x")) || fv_v.count(x);
            CHECK(ok);
        }
    }
}

TEST_CASE("weakening") {
    testsupport::Gen g(99);
    std::vector<Variable> vars{Variable("x")};
    TypeEnv env{{Variable("x"), Type::real()}};
    TypeEnv wider = env;
    wider[Variable("z")] = Type::boolean();
    for (int i = 0; i < 100; ++i) {
        ExprPtr e = g.arith(vars, 3);
        CHECK(type_check_expr(env, e) == type_check_expr(wider, e));
    }
}

TEST_CASE("structural equality ignores spans and annotations") {
    ExprPtr a = pe("x + sin(y)");
    ExprPtr b = erase(label_program(parse("w_ = x + sin(y)").root)->items[0]->rhs);
    CHECK(equal_expr(a, b));
    CHECK(cmp_expr(pe("x"), pe("y")) != 0);
}
