#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "coredel/parser.hpp"
#include "support.hpp"

using namespace coredel;

namespace {

ExprPtr pe(const std::string& s) { return parse("w_ = " + s).root->items[0]->rhs; }

std::string parse_err(const std::string& s) {
    try {
        parse(s);
    } catch (const ParseError& e) {
        CHECK(e.span().valid());
        return e.what();
    }
    return "";
}

} // namespace

TEST_CASE("cam line parses to the documented tree") {
    ParsedProgram p = parse("v = x'[t]*t', a = (v)'");
    REQUIRE(p.root->items.size() == 2);
    const EqPtr& v = p.root->items[0];
    CHECK(v->kind == EqKind::Directed);
    CHECK(v->lhs->var == Variable("v"));
    CHECK(v->rhs->kind == ExprKind::Apply);
    CHECK(v->rhs->fn == "*");
    const ExprPtr& pd = v->rhs->kids[0];
    CHECK(pd->kind == ExprKind::PartialDer);
    CHECK(pd->kids[0]->var == Variable("x")); // the prime belongs to the bracket
    CHECK(pd->kids[1]->var == Variable("t"));
    CHECK(v->rhs->kids[1]->var == Variable("t", 1));
    const EqPtr& a = p.root->items[1];
    CHECK(a->rhs->kind == ExprKind::TimeDer);
    CHECK(a->rhs->kids[0]->var == Variable("v"));
}

TEST_CASE("resets") {
    ParsedProgram p = parse("t1 += t2 - t1");
    CHECK(p.root->items[0]->kind == EqKind::Reset);
    CHECK(p.root->items[0]->lhs->var == Variable("t1"));
    CHECK(pretty(p.root->items[0]) == "t1 += t2 - t1");
    CHECK(pretty(mk_reset(mk_var(Variable("t1")),
                          mk_apply("*", {mk_rat(Rational(-1)), mk_var(Variable("t2"))}))) ==
          "t1 += -t2");
}

TEST_CASE("foreach parses to a family") {
    ParsedProgram p = parse("foreach i in 0:length(q) - 1 do L'[(q(i))']' - L'[q(i)] = 0");
    const EqPtr& f = p.root->items[0];
    REQUIRE(f->kind == EqKind::Family);
    CHECK(f->binder->var == Variable("i"));
    CHECK(f->range->fn == ":");
    // range binds below +/-: 0:(length(q) - 1)
    CHECK(f->range->kids[1]->fn == "-");
    CHECK(f->body->kind == EqKind::Undirected);
    // body left side: (d/dt of dL/d(q(i))') minus dL/d(q(i))
    const ExprPtr& lhs = f->body->lhs;
    CHECK(lhs->fn == "-");
    CHECK(lhs->kids[0]->kind == ExprKind::TimeDer);
    CHECK(lhs->kids[0]->kids[0]->kind == ExprKind::PartialDer);
    CHECK(lhs->kids[1]->kind == ExprKind::PartialDer);
}

TEST_CASE("conditionals and noelse") {
    ParsedProgram p = parse("if g < 0 && (g)' < 0 then a += 1, b += 2 noelse");
    const EqPtr& c = p.root->items[0];
    REQUIRE(c->kind == EqKind::Cond);
    CHECK(c->then_eq->items.size() == 2);
    CHECK(c->else_eq->items.empty());
    // a < b parses as the flipped b > a
    CHECK(c->guard->fn == "&&");
    CHECK(c->guard->kids[0]->fn == ">");
    CHECK(equal_expr(c->guard->kids[0]->kids[0], pe("0")));

    ParsedProgram q = parse("if 1 > 0 then {} else {}");
    CHECK(q.root->items[0]->then_eq->items.empty());
    CHECK(q.root->items[0]->else_eq->items.empty());
}

TEST_CASE("precedence") {
    CHECK(equal_expr(pe("a + b * c"), pe("a + (b * c)")));
    CHECK(equal_expr(pe("a ^ b ^ c"), pe("a ^ (b ^ c)")));
    CHECK(!equal_expr(pe("(a + b) * c"), pe("a + b * c")));
    CHECK(equal_expr(pe("-x^2"), pe("-(x^2)")));
    CHECK(equal_expr(pe("a || b && c"), pe("a || (b && c)")));
    CHECK(equal_expr(pe("a > b && c > d"), pe("(a > b) && (c > d)")));
}

TEST_CASE("literals") {
    CHECK(pe("0.044")->lit.value == Rational::from_decimal_string("0.044"));
    CHECK(pe("0.044")->lit.kind == Constant::Kind::Real);
    CHECK(pe("3")->lit.kind == Constant::Kind::Nat);
    CHECK(pe("pi")->lit.kind == Constant::Kind::Pi);
    CHECK(pe("-2")->lit.value == Rational(-2));
}

TEST_CASE("parse errors carry spans") {
    CHECK(parse_err("x = ") == "unexpected end of input");
    CHECK(!parse_err("x = ((1)").empty());
    CHECK(!parse_err("= 3").empty());
    CHECK(!parse_err("foreach x' in e do x = 1").empty());
    CHECK(!parse_err("3 += 1").empty());
    try {
        parse("x = 1,\n  y = $");
    } catch (const ParseError& e) {
        CHECK(e.span().line0 == 2);
    }
}

TEST_CASE("pretty prints the derivative forms from the corpus") {
    ExprPtr pd = mk_partial_der(mk_var(Variable("L")),
                                mk_time_der(mk_index(mk_var(Variable("q")), mk_num(0))));
    CHECK(pretty(pd) == "L'[(q(0))']");
    CHECK(pretty(pe("L'[(q(0))']'")) == "(L'[(q(0))'])'");
    CHECK(pretty(mk_partial_der(mk_var(Variable("x", 1)), mk_var(Variable("t")))) == "(x')'[t]");
    // and that last form round-trips to the same tree
    CHECK(equal_expr(pe("(x')'[t]"), mk_partial_der(mk_var(Variable("x", 1)), mk_var(Variable("t")))));
}

TEST_CASE("corpus files round-trip") {
    for (const char* name : {"pendulum.cdl", "pendulum_pd.cdl", "cam.cdl", "biped.cdl"}) {
        ParsedProgram p = parse(testsupport::read_model_file(name), name);
        ParsedProgram back = parse(pretty(p), name);
        CHECK(equal_eq(p.root, back.root));
    }
}

namespace {

void check_spans(const ExprPtr& e, int lines, size_t& seen) {
    if (!e) return;
    CHECK(e->span.valid());
    CHECK(e->span.line0 >= 1);
    CHECK(e->span.line1 <= lines);
    CHECK(e->span.line0 <= e->span.line1);
    ++seen;
    for (const auto& k : e->kids) check_spans(k, lines, seen);
}

void check_spans(const EqPtr& s, int lines, size_t& seen) {
    if (!s) return;
    CHECK(s->span.valid());
    CHECK(s->span.line1 <= lines);
    ++seen;
    check_spans(s->lhs, lines, seen);
    check_spans(s->rhs, lines, seen);
    check_spans(s->guard, lines, seen);
    check_spans(s->binder, lines, seen);
    check_spans(s->range, lines, seen);
    check_spans(s->then_eq, lines, seen);
    check_spans(s->else_eq, lines, seen);
    check_spans(s->body, lines, seen);
    for (const auto& it : s->items) check_spans(it, lines, seen);
}

} // namespace

TEST_CASE("every parsed node carries a span inside the input") {
    for (const char* name : {"pendulum.cdl", "biped.cdl"}) {
        std::string text = testsupport::read_model_file(name);
        int lines = 1 + static_cast<int>(std::count(text.begin(), text.end(), '\n'));
        ParsedProgram p = parse(text, name);
        size_t seen = 0;
        check_spans(p.root, lines, seen);
        CHECK(seen > 50);
    }
}

namespace {

// random program generator for the round-trip property; sticks to
// decimal-representable rationals, which print exactly
EqPtr gen_equation(testsupport::Gen& g, int depth);

ExprPtr gen_expr(testsupport::Gen& g, int depth) {
    if (depth <= 0 || g.chance(0.3)) {
        switch (g.pick(4)) {
            case 0: return mk_var(Variable("x", g.pick(3)));
            case 1: return mk_var(Variable(std::string(1, static_cast<char>('a' + g.pick(4)))));
            case 2: return mk_num(g.pick(20));
            default:
                return mk_const(Constant::real(Rational(BigInt(g.pick(40) - 20), BigInt(1)) *
                                               Rational(BigInt(1), BigInt(10))));
        }
    }
    switch (g.pick(10)) {
        case 0: return mk_apply("+", {gen_expr(g, depth - 1), gen_expr(g, depth - 1)});
        case 1: return mk_apply("-", {gen_expr(g, depth - 1), gen_expr(g, depth - 1)});
        case 2: return mk_apply("*", {gen_expr(g, depth - 1), gen_expr(g, depth - 1)});
        case 3: return mk_apply("/", {gen_expr(g, depth - 1), gen_expr(g, depth - 1)});
        case 4: return mk_apply("^", {gen_expr(g, depth - 1), gen_expr(g, depth - 1)});
        case 5: return mk_apply("sin", {gen_expr(g, depth - 1)});
        case 6: return mk_vector({gen_expr(g, depth - 1), gen_expr(g, depth - 1)});
        case 7: return mk_index(gen_expr(g, depth - 1), gen_expr(g, depth - 1));
        case 8: return mk_time_der(gen_expr(g, depth - 1));
        default: return mk_partial_der(gen_expr(g, depth - 1), gen_expr(g, depth - 1));
    }
}

EqPtr gen_equation(testsupport::Gen& g, int depth) {
    switch (depth <= 0 ? g.pick(3) : g.pick(6)) {
        case 0: return mk_directed(mk_var(Variable("v", g.pick(2))), gen_expr(g, depth));
        case 1: {
            // undirected left sides are never bare variables
            ExprPtr lhs = mk_apply("+", {gen_expr(g, depth), gen_expr(g, depth)});
            return mk_undirected(lhs, gen_expr(g, depth));
        }
        case 2: return mk_reset(mk_var(Variable("w")), gen_expr(g, depth));
        case 3: {
            std::vector<EqPtr> t{gen_equation(g, depth - 1)};
            std::vector<EqPtr> e;
            if (g.chance(0.5)) e.push_back(gen_equation(g, depth - 1));
            return mk_cond(mk_apply(">", {gen_expr(g, 1), gen_expr(g, 1)}), mk_set(std::move(t)),
                           mk_set(std::move(e)));
        }
        case 4:
            return mk_family(mk_var(Variable("i")), gen_expr(g, 1), gen_equation(g, depth - 1));
        default: {
            std::vector<EqPtr> items;
            int n = g.pick(3);
            for (int i = 0; i < n; ++i) items.push_back(gen_equation(g, depth - 1));
            return mk_set(std::move(items));
        }
    }
}

} // namespace

TEST_CASE("round-trip property on generated programs") {
    testsupport::Gen g(2024);
    for (int i = 0; i < 300; ++i) {
        std::vector<EqPtr> items;
        int n = 1 + g.pick(3);
        for (int k = 0; k < n; ++k) items.push_back(gen_equation(g, 2));
        EqPtr prog = mk_set(std::move(items));
        std::string text = pretty(ParsedProgram{prog, "<gen>"});
        ParsedProgram back = parse(text, "<gen>");
        if (!equal_eq(prog, back.root)) {
            CAPTURE(text);
            CHECK(equal_eq(prog, back.root));
        }
    }
}
