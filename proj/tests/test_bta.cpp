#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "coredel/bta.hpp"
#include "support.hpp"

using namespace coredel;

namespace {

Label lab(std::initializer_list<int> path) {
    Label l;
    l.path = path;
    return l;
}

Constraint c_ll(Label a, Label b) { return {BTExpr::of(a), BTExpr::of(b)}; }
Constraint c_bl(BT a, Label b) { return {BTExpr::of(a), BTExpr::of(b)}; }
Constraint c_lb(Label a, BT b) { return {BTExpr::of(a), BTExpr::of(b)}; }
Constraint c_bb(BT a, BT b) { return {BTExpr::of(a), BTExpr::of(b)}; }

bool has(const ConstraintSet& cs, const Constraint& c) {
    for (const Constraint& x : cs.items())
        if (x == c) return true;
    return false;
}

struct Analyzed {
    EqPtr labeled;
    GlobalEnv rho;
    ConstraintSet constraints;
};

Analyzed analyze(const std::string& src) {
    ParsedProgram p = parse(src);
    Analyzed a;
    a.labeled = label_program(p.root);
    a.rho = build_global_env(a.labeled);
    a.constraints = gen_constraints(a.labeled, a.rho);
    return a;
}

} // namespace

TEST_CASE("labeling") {
    ParsedProgram p = parse("x = 1");
    EqPtr l = label_program(p.root);
    CHECK(l->label.is_root());
    CHECK(l->items[0]->label == lab({1}));
    CHECK(l->items[0]->lhs->label == lab({1, 1}));
    CHECK(l->items[0]->rhs->label == lab({1, 2}));

    EqPtr empty = label_program(parse("").root);
    CHECK(empty->label.is_root());
    CHECK(empty->items.empty());

    EqPtr two = label_program(parse("x = 1, y = 2").root);
    CHECK(two->items[0]->label == lab({1}));
    CHECK(two->items[1]->label == lab({2}));
    CHECK(lab({1, 2}).str() == "root.1.2");
}

TEST_CASE("global environment of the two-branch example") {
    // x is visible in both branches through the scope chain; y is defined
    // per branch
    Analyzed a = analyze("x = 1, if t < 5 then y = x else y' = x");
    const GlobalEnv& rho = a.rho;

    CHECK(rho.scopes.count(lab({})));
    CHECK(rho.scopes.count(lab({2, 2})));
    CHECK(rho.scopes.count(lab({2, 3})));

    CHECK(rho.lookup(lab({}), Variable("x")) == lab({1, 1}));
    CHECK(rho.lookup(lab({2, 2}), Variable("x")) == lab({1, 1}));
    CHECK(rho.lookup(lab({2, 2}), Variable("y")) == lab({2, 2, 1, 1}));
    CHECK(rho.lookup(lab({2, 3}), Variable("y", 1)) == lab({2, 3, 1, 1}));
    CHECK(!rho.lookup(lab({}), Variable("y")).has_value());
    CHECK(!rho.lookup(lab({}), Variable("t")).has_value()); // runtime state
}

TEST_CASE("empty program yields the root scope") {
    Analyzed a = analyze("");
    CHECK(a.rho.scopes.size() == 1);
    CHECK(a.rho.scopes.count(lab({})));
    CHECK(a.rho.scopes.at(lab({})).empty());
}

TEST_CASE("duplicate definitions are rejected per scope") {
    CHECK_THROWS_AS(analyze("x = 1, x = 2"), BtaError);
    // different branches are different scopes
    CHECK_NOTHROW(analyze("if t > 0 then y = 1 else y = 2"));
}

TEST_CASE("binder registration stays inside the family") {
    Analyzed a = analyze("foreach i in (1, 2) do z = i");
    CHECK(!a.rho.lookup(lab({}), Variable("i")).has_value());
    CHECK(a.rho.lookup(lab({}), Variable("z")).has_value());
}

TEST_CASE("constraint clauses") {
    SUBCASE("constant") {
        Analyzed a = analyze("x = 1");
        CHECK(has(a.constraints, c_lb(lab({1, 2}), BT::S)));
    }
    SUBCASE("name ties occurrence to definition both ways") {
        Analyzed a = analyze("x = 1, y = x");
        // x occurrence in y's right-hand side is root.2.2
        CHECK(has(a.constraints, c_ll(lab({1, 1}), lab({2, 2}))));
        CHECK(has(a.constraints, c_ll(lab({2, 2}), lab({1, 1}))));
    }
    SUBCASE("primed variable forces the lower derivative dynamic") {
        Analyzed a = analyze("y = x'");
        // x' occurrence at root.1.2 recurses on x at root.1.2.1
        CHECK(has(a.constraints, c_bl(BT::D, lab({1, 2, 1}))));
        // unbound x' resolves to D
        CHECK(has(a.constraints, c_bl(BT::D, lab({1, 2}))));
    }
    SUBCASE("directed equation flows right to left") {
        Analyzed a = analyze("x = 1");
        CHECK(has(a.constraints, c_ll(lab({1, 1}), lab({1}))));
        CHECK(has(a.constraints, c_ll(lab({1, 2}), lab({1}))));
        CHECK(has(a.constraints, c_ll(lab({1, 2}), lab({1, 1}))));
    }
    SUBCASE("reset constrains only its right-hand side") {
        Analyzed a = analyze("x += 1");
        CHECK(has(a.constraints, c_lb(lab({1, 2}), BT::S)));
        CHECK(has(a.constraints, c_ll(lab({1, 2}), lab({1}))));
        // plus the enclosing set's membership constraint; nothing for the lhs
        CHECK(has(a.constraints, c_ll(lab({1}), lab({}))));
        CHECK(a.constraints.size() == 3);
    }
    SUBCASE("conditional switches scope into its branches") {
        Analyzed a = analyze("x = 1, if t < 5 then y = x else y' = x");
        // the x occurrence in the then branch still ties to the root definition
        CHECK(has(a.constraints, c_ll(lab({1, 1}), lab({2, 2, 1, 2}))));
        // branch sets flow into the conditional
        CHECK(has(a.constraints, c_ll(lab({2, 2}), lab({2}))));
        CHECK(has(a.constraints, c_ll(lab({2, 3}), lab({2}))));
        CHECK(has(a.constraints, c_ll(lab({2, 1}), lab({2}))));
    }
    SUBCASE("family: range flows into the binder, body into the equation") {
        Analyzed a = analyze("foreach i in (1, 2) do z = i");
        CHECK(has(a.constraints, c_ll(lab({1, 2}), lab({1, 1}))));
        CHECK(has(a.constraints, c_ll(lab({1, 3}), lab({1}))));
        // binder occurrences inside the body tie to the binder label
        CHECK(has(a.constraints, c_ll(lab({1, 1}), lab({1, 3, 2}))));
    }
    SUBCASE("length leaves its result label unconstrained from the argument") {
        Analyzed a = analyze("q = (x, y), n = length(q)");
        // q's definition is dynamic, yet no constraint pushes it into the
        // length node at root.2.2
        for (const Constraint& c : a.constraints.items()) {
            bool into_len = c.rhs.is_label() && c.rhs.lab == lab({2, 2});
            CHECK(!into_len);
        }
    }
}

TEST_CASE("normalization unit cases") {
    SUBCASE("trivial constant constraints vanish") {
        ConstraintSet cs;
        cs.add(c_bb(BT::S, BT::S));
        NormalizeResult n = normalize(cs, true);
        CHECK(n.subst.empty());
        CHECK(n.residue.empty());
        CHECK(n.steps == 1);
        CHECK(n.trace[0].rule == 'a');
    }
    SUBCASE("forced contradiction reaches error form") {
        ConstraintSet cs;
        cs.add(c_lb(lab({1}), BT::S));
        cs.add(c_bl(BT::D, lab({1})));
        NormalizeResult n = normalize(cs);
        CHECK(n.subst.at(lab({1})) == BT::S);
        CHECK(n.residue.is_error_form());
    }
    SUBCASE("normal forms are fixed points") {
        ConstraintSet cs;
        cs.add(c_bl(BT::S, lab({1})));
        cs.add(c_ll(lab({1}), lab({2})));
        CHECK(cs.is_normal_form());
        NormalizeResult n = normalize(cs);
        CHECK(n.steps == 0);
        CHECK(n.residue.size() == 2);
    }
}

TEST_CASE("minimal solution on tiny programs") {
    Analyzed a = analyze("x = 1");
    auto sol = minimal_solution(a.constraints);
    REQUIRE(std::holds_alternative<Substitution>(sol));
    for (const auto& [l, b] : std::get<Substitution>(sol)) CHECK(b == BT::S);

    ConstraintSet bad;
    bad.add(c_bb(BT::D, BT::S));
    CHECK(std::holds_alternative<BTAConflict>(minimal_solution(bad)));
}

// the all-static verdict above is confirmed minimal by brute force over every
// assignment of the program's labels (see the enumeration oracle below)

// ---------------------------------------------------------------------------
// brute-force oracle: enumerate all assignments over the labels

namespace {

struct Enumerated {
    bool solvable = false;
    Substitution minimal; // pointwise meet of all solutions
};

bool satisfied(const Constraint& c, const Substitution& sigma) {
    auto value = [&](const BTExpr& b) { return b.is_label() ? sigma.at(b.lab) : b.bt; };
    return bt_le(value(c.lhs), value(c.rhs));
}

Enumerated enumerate_solutions(const ConstraintSet& cs) {
    std::set<Label> label_set = cs.labels();
    std::vector<Label> labels(label_set.begin(), label_set.end());
    Enumerated out;
    size_t n = labels.size();
    for (size_t mask = 0; mask < (size_t{1} << n); ++mask) {
        Substitution sigma;
        for (size_t i = 0; i < n; ++i)
            sigma[labels[i]] = (mask >> i) & 1 ? BT::D : BT::S;
        bool ok = true;
        for (const Constraint& c : cs.items())
            if (!satisfied(c, sigma)) {
                ok = false;
                break;
            }
        if (!ok) continue;
        if (!out.solvable) {
            out.solvable = true;
            out.minimal = sigma;
        } else {
            for (auto& [l, b] : out.minimal)
                if (sigma.at(l) == BT::S) b = BT::S; // pointwise meet
        }
    }
    return out;
}

ConstraintSet random_constraints(testsupport::Gen& g, int max_labels, int max_constraints) {
    std::vector<Label> pool;
    int n = 1 + g.pick(max_labels);
    for (int i = 0; i < n; ++i) pool.push_back(Label{{i + 1}});
    auto side = [&]() {
        int k = g.pick(n + 2);
        if (k < n) return BTExpr::of(pool[static_cast<size_t>(k)]);
        return BTExpr::of(k == n ? BT::S : BT::D);
    };
    ConstraintSet cs;
    int m = 1 + g.pick(max_constraints);
    for (int i = 0; i < m; ++i) cs.add({side(), side()});
    return cs;
}

} // namespace

TEST_CASE("tiny program minimality by brute force") {
    Analyzed a = analyze("x = 1");
    Enumerated oracle = enumerate_solutions(a.constraints);
    REQUIRE(oracle.solvable);
    auto sol = minimal_solution(a.constraints);
    REQUIRE(std::holds_alternative<Substitution>(sol));
    CHECK(std::get<Substitution>(sol) == oracle.minimal);
    for (const auto& [l, b] : oracle.minimal) CHECK(b == BT::S);
}

TEST_CASE("minimal_solution matches exhaustive enumeration") {
    testsupport::Gen g(424242);
    int solvable = 0, unsolvable = 0;
    for (int trial = 0; trial < 500; ++trial) {
        ConstraintSet cs = random_constraints(g, 6, 12);
        Enumerated oracle = enumerate_solutions(cs);
        auto sol = minimal_solution(cs);
        if (!oracle.solvable) {
            CHECK(std::holds_alternative<BTAConflict>(sol));
            ++unsolvable;
            continue;
        }
        ++solvable;
        REQUIRE(std::holds_alternative<Substitution>(sol));
        const Substitution& got = std::get<Substitution>(sol);
        CHECK(got.size() == oracle.minimal.size());
        for (const auto& [l, b] : oracle.minimal) {
            REQUIRE(got.count(l));
            CHECK(got.at(l) == b);
        }
    }
    // both verdicts must actually be exercised
    CHECK(solvable > 50);
    CHECK(unsolvable > 50);
}

TEST_CASE("normalization terminates within the constraint count and preserves solutions") {
    testsupport::Gen g(777);
    for (int trial = 0; trial < 500; ++trial) {
        ConstraintSet cs = random_constraints(g, 6, 12);
        NormalizeResult n = normalize(cs, true);
        CHECK(n.steps <= cs.size());

        // replay: for every prefix, a solution of the suffix composed with the
        // prefix substitutions solves the original set
        for (size_t k = 0; k <= n.trace.size(); ++k) {
            ConstraintSet suffix;
            const std::vector<Constraint>& after =
                k == 0 ? cs.items() : n.trace[k - 1].after;
            for (const Constraint& c : after) suffix.add(c);
            Enumerated sub = enumerate_solutions(suffix);
            if (!sub.solvable) continue;
            Substitution total;
            for (size_t i = 0; i < k; ++i)
                for (const auto& [l, b] : n.trace[i].subst) total.emplace(l, b);
            for (const auto& [l, b] : sub.minimal) total.emplace(l, b);
            // check the composition against the original set
            bool ok = true;
            for (const Constraint& c : cs.items()) {
                auto value = [&](const BTExpr& e) {
                    if (!e.is_label()) return e.bt;
                    auto it = total.find(e.lab);
                    return it == total.end() ? BT::S : it->second;
                };
                if (!bt_le(value(c.lhs), value(c.rhs))) ok = false;
            }
            CHECK(ok);
        }
    }
}

TEST_CASE("pendulum shading") {
    ParsedProgram p = parse(testsupport::read_model_file("pendulum.cdl"), "pendulum.cdl");
    EqPtr labeled = label_program(p.root);
    GlobalEnv rho = build_global_env(labeled);
    ConstraintSet cs = gen_constraints(labeled, rho);
    auto sol = minimal_solution(cs);
    REQUIRE(std::holds_alternative<Substitution>(sol));
    const Substitution& sigma = std::get<Substitution>(sol);

    auto def_bt = [&](const char* name, int primes = 0) {
        auto l = rho.lookup(Label{}, Variable(name, primes));
        REQUIRE(l.has_value());
        auto it = sigma.find(*l);
        return it == sigma.end() ? BT::S : it->second;
    };
    CHECK(def_bt("a") == BT::S);
    CHECK(def_bt("m") == BT::S);
    CHECK(def_bt("M") == BT::S);
    CHECK(def_bt("g") == BT::S);
    CHECK(def_bt("k") == BT::S);
    CHECK(def_bt("I") == BT::S);
    CHECK(def_bt("q") == BT::D);
    CHECK(def_bt("L") == BT::D);
    CHECK(def_bt("T") == BT::D);
    CHECK(def_bt("V") == BT::D);

    EqPtr annotated = annotate(labeled, sigma);
    // the family binder and its range are static, the body is dynamic
    const EqPtr& family = annotated->items.back();
    REQUIRE(family->kind == EqKind::Family);
    CHECK(*family->binder->bt == BT::S);
    CHECK(*family->range->bt == BT::S);
    CHECK(*family->body->bt == BT::D);
    // q(i) lookups are dynamic expressions with a static index
    const ExprPtr& pder = family->body->lhs->kids[1]; // L'[q(i)]
    REQUIRE(pder->kind == ExprKind::PartialDer);
    CHECK(*pder->kids[1]->bt == BT::D);
    CHECK(*pder->kids[1]->kids[1]->bt == BT::S);
}

TEST_CASE("annotation erases back to the program") {
    for (const char* name : {"pendulum.cdl", "pendulum_pd.cdl", "cam.cdl", "biped.cdl"}) {
        ParsedProgram p = parse(testsupport::read_model_file(name), name);
        EqPtr labeled = label_program(p.root);
        GlobalEnv rho = build_global_env(labeled);
        auto sol = minimal_solution(gen_constraints(labeled, rho));
        REQUIRE(std::holds_alternative<Substitution>(sol));
        EqPtr annotated = annotate(labeled, std::get<Substitution>(sol));
        CHECK(equal_eq(erase(annotated), p.root));
        CHECK(equal_eq(erase(annotated), erase(labeled)));
    }
}

TEST_CASE("declarative verification accepts corpus annotations") {
    for (const char* name : {"pendulum.cdl", "pendulum_pd.cdl", "cam.cdl", "biped.cdl"}) {
        Compilation c = analyze_text(testsupport::read_model_file(name), name);
        std::vector<BtaViolation> v = verify_annotation(c.env, c.rho, c.sigma, c.annotated);
        CHECK(v.empty());
    }
}

TEST_CASE("declarative verification flags hand-broken annotations") {
    auto break_label = [](const std::string& src, std::initializer_list<int> path, BT b) {
        Compilation c = analyze_text(src, "<test>");
        Substitution broken = c.sigma;
        broken[lab(path)] = b;
        EqPtr bad = annotate(c.labeled, broken);
        return verify_annotation(c.env, c.rho, broken, bad);
    };
    // directed equation: rhs dynamic while the definition stays static
    CHECK(!break_label("x = 1", {1, 2}, BT::D).empty());
    // variable occurrence contradicting its definition site
    CHECK(!break_label("c = 1, y = c * x'", {2, 2, 1}, BT::D).empty());
    // vector literal must join its elements
    CHECK(!break_label("v = (x, 1)", {1, 2}, BT::S).empty());
    // time derivative must carry its operand's binding time
    CHECK(!break_label("y = (x)'", {1, 2}, BT::S).empty());
    // reset must carry its right-hand side's binding time
    CHECK(!break_label("x += y", {1}, BT::S).empty());
    // family binder must carry the range's binding time
    CHECK(!break_label("foreach i in 0:2 do i + x = 1", {1, 1}, BT::D).empty());
    // conditional joins guard and branches
    CHECK(!break_label("if x > 0 then y_ += 1 noelse", {1}, BT::S).empty());
}

TEST_CASE("bta dump golden") {
    Compilation c = analyze_text("c = 1, y = c * x'", "<test>");
    std::string d1 = dump_bta(c.annotated, c.sigma);
    CHECK(d1 == dump_bta(c.annotated, c.sigma));
    // frozen format: bracketed dynamic equations, then one line per label.
    // root.2.2 is the product (dynamic), root.2.2.1 the static coefficient,
    // root.2.2.2.1 the virtual occurrence of x below x'.
    const char* golden =
        "c = 1\n"
        "⟦y = c * x'⟧\n"
        "--- substitution ---\n"
        "root -> D\n"
        "root.1 -> S\n"
        "root.1.1 -> S\n"
        "root.1.2 -> S\n"
        "root.2 -> D\n"
        "root.2.1 -> D\n"
        "root.2.2 -> D\n"
        "root.2.2.1 -> S\n"
        "root.2.2.2 -> D\n"
        "root.2.2.2.1 -> D\n";
    CHECK(d1 == golden);
}
