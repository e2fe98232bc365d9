#include "coredel/parser.hpp"

#include <cctype>

namespace coredel {

namespace {

enum class Tok {
    End, Ident, Number, Prime,
    LParen, RParen, LBrace, RBrace, LBracket, RBracket,
    Comma, Colon,
    Plus, Minus, Star, Slash, Caret,
    AndAnd, OrOr, Gt, Ge, Lt, Le, EqEq, Ne,
    Assign, PlusAssign,
    KwIf, KwThen, KwElse, KwNoelse, KwForeach, KwIn, KwDo, KwTrue, KwFalse, KwPi,
};

struct Token {
    Tok kind;
    std::string text;
    int primes = 0; // Ident: attached prime count
    SourceSpan span;
};

class Lexer {
public:
    Lexer(const std::string& src, std::string file) : src_(src), file_(std::move(file)) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        for (;;) {
            skip_ws();
            if (pos_ >= src_.size()) {
                out.push_back({Tok::End, "", 0, here()});
                return out;
            }
            out.push_back(next());
        }
    }

private:
    const std::string& src_;
    std::string file_;
    size_t pos_ = 0;
    int line_ = 1, col_ = 1;

    SourceSpan here() const { return {line_, col_, line_, col_}; }

    char peek(size_t off = 0) const { return pos_ + off < src_.size() ? src_[pos_ + off] : '\0'; }

    char advance() {
        char c = src_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return c;
    }

    void skip_ws() {
        for (;;) {
            char c = peek();
            if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                advance();
            } else if (c == '#' || (c == '/' && peek(1) == '/')) {
                while (pos_ < src_.size() && peek() != '\n') advance();
            } else {
                return;
            }
        }
    }

    [[noreturn]] void fail(const std::string& msg) { throw ParseError("ParseError", msg, here()); }

    Token next() {
        SourceSpan start = here();
        char c = peek();
        auto tok = [&](Tok k, std::string text) {
            SourceSpan sp = start;
            sp.line1 = line_;
            sp.col1 = col_ > 1 ? col_ - 1 : col_;
            return Token{k, std::move(text), 0, sp};
        };

        if (isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::string id;
            while (isalnum(static_cast<unsigned char>(peek())) || peek() == '_') id.push_back(advance());
            int primes = 0;
            while (peek() == '\'') {
                advance();
                ++primes;
            }
            static const std::map<std::string, Tok> kw = {
                {"if", Tok::KwIf},         {"then", Tok::KwThen},   {"else", Tok::KwElse},
                {"noelse", Tok::KwNoelse}, {"foreach", Tok::KwForeach}, {"in", Tok::KwIn},
                {"do", Tok::KwDo},         {"true", Tok::KwTrue},   {"false", Tok::KwFalse},
                {"pi", Tok::KwPi},
            };
            auto it = kw.find(id);
            if (it != kw.end()) {
                if (primes) fail("unexpected prime after keyword '" + id + "'");
                return tok(it->second, id);
            }
            Token t = tok(Tok::Ident, id);
            t.primes = primes;
            return t;
        }

        if (isdigit(static_cast<unsigned char>(c))) {
            std::string num;
            while (isdigit(static_cast<unsigned char>(peek()))) num.push_back(advance());
            if (peek() == '.' && isdigit(static_cast<unsigned char>(peek(1)))) {
                num.push_back(advance());
                while (isdigit(static_cast<unsigned char>(peek()))) num.push_back(advance());
            }
            return tok(Tok::Number, num);
        }

        advance();
        switch (c) {
            case '\'': return tok(Tok::Prime, "'");
            case '(': return tok(Tok::LParen, "(");
            case ')': return tok(Tok::RParen, ")");
            case '{': return tok(Tok::LBrace, "{");
            case '}': return tok(Tok::RBrace, "}");
            case '[': return tok(Tok::LBracket, "[");
            case ']': return tok(Tok::RBracket, "]");
            case ',': return tok(Tok::Comma, ",");
            case ':': return tok(Tok::Colon, ":");
            case '+':
                if (peek() == '=') {
                    advance();
                    return tok(Tok::PlusAssign, "+=");
                }
                return tok(Tok::Plus, "+");
            case '-': return tok(Tok::Minus, "-");
            case '*': return tok(Tok::Star, "*");
            case '/': return tok(Tok::Slash, "/");
            case '^': return tok(Tok::Caret, "^");
            case '&':
                if (peek() == '&') {
                    advance();
                    return tok(Tok::AndAnd, "&&");
                }
                fail("stray '&'");
            case '|':
                if (peek() == '|') {
                    advance();
                    return tok(Tok::OrOr, "||");
                }
                fail("stray '|'");
            case '>':
                if (peek() == '=') {
                    advance();
                    return tok(Tok::Ge, ">=");
                }
                return tok(Tok::Gt, ">");
            case '<':
                if (peek() == '=') {
                    advance();
                    return tok(Tok::Le, "<=");
                }
                return tok(Tok::Lt, "<");
            case '=':
                if (peek() == '=') {
                    advance();
                    return tok(Tok::EqEq, "==");
                }
                return tok(Tok::Assign, "=");
            case '!':
                if (peek() == '=') {
                    advance();
                    return tok(Tok::Ne, "!=");
                }
                fail("stray '!'");
            default: break;
        }
        fail(std::string("unexpected character '") + c + "'");
    }
};

SourceSpan join_spans(SourceSpan a, SourceSpan b) {
    if (!a.valid()) return b;
    if (!b.valid()) return a;
    SourceSpan r = a;
    r.line1 = b.line1;
    r.col1 = b.col1;
    return r;
}

class Parser {
public:
    Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    EqPtr program() {
        std::vector<EqPtr> items = eq_list();
        expect(Tok::End, "end of input");
        SourceSpan sp = items.empty() ? SourceSpan{1, 1, 1, 1}
                                      : join_spans(items.front()->span, items.back()->span);
        return mk_set(std::move(items), sp);
    }

private:
    std::vector<Token> toks_;
    size_t i_ = 0;

    const Token& cur() const { return toks_[i_]; }
    const Token& ahead(size_t k = 1) const { return toks_[std::min(i_ + k, toks_.size() - 1)]; }
    Token take() { return toks_[i_++]; }
    bool at(Tok k) const { return cur().kind == k; }

    bool accept(Tok k) {
        if (!at(k)) return false;
        ++i_;
        return true;
    }

    Token expect(Tok k, const std::string& what) {
        if (!at(k))
            throw ParseError("ParseError",
                             "expected " + what + ", found '" +
                                 (cur().kind == Tok::End ? "end of input" : cur().text) + "'",
                             cur().span);
        return take();
    }

    bool at_eq_list_end() const {
        switch (cur().kind) {
            case Tok::End:
            case Tok::RBrace:
            case Tok::KwElse:
            case Tok::KwNoelse: return true;
            default: return false;
        }
    }

    std::vector<EqPtr> eq_list() {
        std::vector<EqPtr> items;
        if (at_eq_list_end()) return items;
        items.push_back(equation());
        while (accept(Tok::Comma)) {
            if (at_eq_list_end()) break; // tolerate a trailing comma
            items.push_back(equation());
        }
        return items;
    }

    EqPtr braced_or_single_eq() {
        // used for foreach bodies: one equation, or a braced group
        return equation();
    }

    // A conditional branch is always a Set. A branch that starts with a
    // braced group is exactly that group, so `then {a = 1, b = 2}` and
    // `then a = 1, b = 2` yield the same tree and a braced else never
    // swallows the equations that follow the conditional.
    EqPtr branch_set() {
        if (at(Tok::LBrace)) return equation();
        std::vector<EqPtr> items = eq_list();
        SourceSpan sp = items.empty()
                            ? cur().span
                            : join_spans(items.front()->span, items.back()->span);
        return mk_set(std::move(items), sp);
    }

    EqPtr equation() {
        SourceSpan start = cur().span;

        if (accept(Tok::LBrace)) {
            std::vector<EqPtr> items = eq_list();
            Token close = expect(Tok::RBrace, "'}'");
            return mk_set(std::move(items), join_spans(start, close.span));
        }

        if (accept(Tok::KwIf)) {
            ExprPtr g = expression();
            expect(Tok::KwThen, "'then'");
            EqPtr then_set = branch_set();
            EqPtr else_set;
            SourceSpan end_sp;
            if (accept(Tok::KwNoelse)) {
                else_set = mk_set({}, cur().span);
                end_sp = then_set->span;
            } else {
                expect(Tok::KwElse, "'else' or 'noelse'");
                else_set = branch_set();
                end_sp = else_set->span;
            }
            return mk_cond(g, then_set, else_set, join_spans(start, end_sp));
        }

        if (accept(Tok::KwForeach)) {
            Token name = expect(Tok::Ident, "binder name");
            if (name.primes) throw ParseError("ParseError", "family binder must be unprimed", name.span);
            ExprPtr binder = mk_var(Variable(name.text), name.span);
            expect(Tok::KwIn, "'in'");
            ExprPtr range = expression();
            expect(Tok::KwDo, "'do'");
            EqPtr body = braced_or_single_eq();
            return mk_family(binder, range, body, join_spans(start, body->span));
        }

        ExprPtr lhs = expression();
        if (accept(Tok::PlusAssign)) {
            if (lhs->kind != ExprKind::Var)
                throw ParseError("ParseError", "left side of '+=' must be a variable", lhs->span);
            ExprPtr rhs = expression();
            return mk_reset(lhs, rhs, join_spans(start, rhs->span));
        }
        expect(Tok::Assign, "'='");
        ExprPtr rhs = expression();
        SourceSpan sp = join_spans(start, rhs->span);
        if (lhs->kind == ExprKind::Var) return mk_directed(lhs, rhs, sp);
        return mk_undirected(lhs, rhs, sp);
    }

    // precedence: || < && < comparisons < a:b < +- < */ < unary- < ^ < postfix
    ExprPtr expression() { return parse_or(); }

    ExprPtr parse_or() {
        ExprPtr e = parse_and();
        while (at(Tok::OrOr)) {
            take();
            ExprPtr r = parse_and();
            e = mk_apply("||", {e, r}, join_spans(e->span, r->span));
        }
        return e;
    }

    ExprPtr parse_and() {
        ExprPtr e = parse_cmp();
        while (at(Tok::AndAnd)) {
            take();
            ExprPtr r = parse_cmp();
            e = mk_apply("&&", {e, r}, join_spans(e->span, r->span));
        }
        return e;
    }

    ExprPtr parse_cmp() {
        ExprPtr e = parse_range();
        switch (cur().kind) {
            case Tok::Gt:
            case Tok::Ge:
            case Tok::EqEq:
            case Tok::Ne: {
                Token op = take();
                ExprPtr r = parse_range();
                return mk_apply(op.text, {e, r}, join_spans(e->span, r->span));
            }
            case Tok::Lt:
            case Tok::Le: {
                // a < b is the flipped b > a, keeping the builtin set minimal
                Token op = take();
                ExprPtr r = parse_range();
                return mk_apply(op.kind == Tok::Lt ? ">" : ">=", {r, e},
                                join_spans(e->span, r->span));
            }
            default: return e;
        }
    }

    ExprPtr parse_range() {
        ExprPtr e = parse_add();
        if (at(Tok::Colon)) {
            take();
            ExprPtr r = parse_add();
            return mk_apply(":", {e, r}, join_spans(e->span, r->span));
        }
        return e;
    }

    ExprPtr parse_add() {
        ExprPtr e = parse_mul();
        for (;;) {
            if (at(Tok::Plus)) {
                take();
                ExprPtr r = parse_mul();
                e = mk_apply("+", {e, r}, join_spans(e->span, r->span));
            } else if (at(Tok::Minus)) {
                take();
                ExprPtr r = parse_mul();
                e = mk_apply("-", {e, r}, join_spans(e->span, r->span));
            } else {
                return e;
            }
        }
    }

    ExprPtr parse_mul() {
        ExprPtr e = parse_unary();
        for (;;) {
            if (at(Tok::Star)) {
                take();
                ExprPtr r = parse_unary();
                e = mk_apply("*", {e, r}, join_spans(e->span, r->span));
            } else if (at(Tok::Slash)) {
                take();
                ExprPtr r = parse_unary();
                e = mk_apply("/", {e, r}, join_spans(e->span, r->span));
            } else {
                return e;
            }
        }
    }

    ExprPtr parse_unary() {
        if (at(Tok::Minus)) {
            Token op = take();
            ExprPtr e = parse_unary();
            if (e->kind == ExprKind::Const && e->lit.is_numeric()) {
                Constant c = e->lit;
                c.value = -c.value;
                c.kind = Constant::Kind::Real;
                return mk_const(c, join_spans(op.span, e->span));
            }
            return mk_apply("*", {mk_const(Constant::real(Rational(-1)), op.span), e},
                            join_spans(op.span, e->span));
        }
        return parse_pow();
    }

    ExprPtr parse_pow() {
        ExprPtr e = parse_postfix();
        if (at(Tok::Caret)) {
            take();
            ExprPtr r = parse_unary(); // right associative
            return mk_apply("^", {e, r}, join_spans(e->span, r->span));
        }
        return e;
    }

    ExprPtr parse_postfix() {
        ExprPtr e = primary();
        for (;;) {
            if (at(Tok::LParen)) {
                Token open = take();
                std::vector<ExprPtr> args;
                if (!at(Tok::RParen)) {
                    args.push_back(expression());
                    while (accept(Tok::Comma)) {
                        if (at(Tok::RParen)) break;
                        args.push_back(expression());
                    }
                }
                Token close = expect(Tok::RParen, "')'");
                SourceSpan sp = join_spans(e->span, close.span);
                if (e->kind == ExprKind::Var && e->var.primes == 0 && builtin_info(e->var.base)) {
                    e = mk_apply(e->var.base, std::move(args), sp);
                } else {
                    if (args.size() != 1)
                        throw ParseError("ParseError", "indexing expects exactly one index", sp);
                    e = mk_index(e, args[0], sp);
                }
            } else if (at(Tok::Prime)) {
                Token p = take();
                if (at(Tok::LBracket)) {
                    take();
                    ExprPtr wrt = expression();
                    Token close = expect(Tok::RBracket, "']'");
                    e = mk_partial_der(e, wrt, join_spans(e->span, close.span));
                } else {
                    e = mk_time_der(e, join_spans(e->span, p.span));
                }
            } else if (at(Tok::LBracket) && e->kind == ExprKind::Var && e->var.primes > 0) {
                // x'[t]: the prime attached to the identifier opens the
                // partial-derivative bracket
                take();
                ExprPtr target = mk_var(e->var.lowered(), e->span);
                ExprPtr wrt = expression();
                Token close = expect(Tok::RBracket, "']'");
                e = mk_partial_der(target, wrt, join_spans(e->span, close.span));
            } else {
                return e;
            }
        }
    }

    ExprPtr primary() {
        Token t = cur();
        switch (t.kind) {
            case Tok::Number: {
                take();
                bool decimal = t.text.find('.') != std::string::npos;
                Rational v = Rational::from_decimal_string(t.text);
                return mk_const(decimal ? Constant::real(v) : Constant::nat(v), t.span);
            }
            case Tok::KwTrue:
                take();
                return mk_const(Constant::boolean(true), t.span);
            case Tok::KwFalse:
                take();
                return mk_const(Constant::boolean(false), t.span);
            case Tok::KwPi:
                take();
                return mk_const(Constant::pi(), t.span);
            case Tok::Ident:
                take();
                return mk_var(Variable(t.text, t.primes), t.span);
            case Tok::LParen: {
                take();
                ExprPtr first = expression();
                if (at(Tok::Comma)) {
                    std::vector<ExprPtr> elems{first};
                    while (accept(Tok::Comma)) {
                        if (at(Tok::RParen)) break; // (e,) is a one-element vector
                        elems.push_back(expression());
                    }
                    Token close = expect(Tok::RParen, "')'");
                    return mk_vector(std::move(elems), join_spans(t.span, close.span));
                }
                Token close = expect(Tok::RParen, "')'");
                // grouping: keep the inner node, widen the span
                auto g = std::make_shared<Expr>(*first);
                g->span = join_spans(t.span, close.span);
                return g;
            }
            default:
                throw ParseError("ParseError",
                                 t.kind == Tok::End ? "unexpected end of input"
                                                    : "unexpected token '" + t.text + "'",
                                 t.span);
        }
    }
};

} // namespace

ParsedProgram parse(const std::string& text, const std::string& filename) {
    Lexer lex(text, filename);
    Parser p(lex.run());
    ParsedProgram out;
    out.root = p.program();
    out.filename = filename;
    return out;
}

// ---------------------------------------------------------------------------
// Pretty printer

namespace {

int fn_prec(const std::string& fn) {
    if (fn == "||") return 1;
    if (fn == "&&") return 2;
    if (fn == ">" || fn == ">=" || fn == "==" || fn == "!=") return 3;
    if (fn == ":") return 4;
    if (fn == "+" || fn == "-") return 5;
    if (fn == "*" || fn == "/") return 6;
    if (fn == "^") return 8;
    return 10; // named function call
}

// negated product (-1) * e prints as -e, except when e is itself a numeric
// literal, which must keep the explicit product to reparse identically
bool is_neg_product(const ExprPtr& e) {
    return e->kind == ExprKind::Apply && e->fn == "*" && e->kids.size() == 2 &&
           e->kids[0]->kind == ExprKind::Const && e->kids[0]->lit.is_numeric() &&
           e->kids[0]->lit.value == Rational(-1) &&
           !(e->kids[1]->kind == ExprKind::Const && e->kids[1]->lit.is_numeric());
}

int expr_prec(const ExprPtr& e) {
    switch (e->kind) {
        case ExprKind::Const: {
            if (e->lit.is_numeric()) {
                if (e->lit.value.is_negative()) return 7;
                if (!e->lit.value.is_integer() && e->lit.value.to_decimal_string().empty())
                    return 6; // printed as p/q
            }
            return 10;
        }
        case ExprKind::Apply: {
            if (is_neg_product(e)) return 7;
            return fn_prec(e->fn);
        }
        case ExprKind::Var:
        case ExprKind::VectorLit: return 10;
        case ExprKind::Index:
        case ExprKind::TimeDer:
        case ExprKind::PartialDer: return 9;
    }
    return 10;
}

void print_expr(const ExprPtr& e, std::string& out);

void print_child(const ExprPtr& e, int min_prec, std::string& out) {
    if (expr_prec(e) < min_prec) {
        out += '(';
        print_expr(e, out);
        out += ')';
    } else {
        print_expr(e, out);
    }
}

void print_const(const Constant& c, std::string& out) {
    switch (c.kind) {
        case Constant::Kind::Bool: out += c.bval ? "true" : "false"; return;
        case Constant::Kind::Pi: out += "pi"; return;
        case Constant::Kind::Nat: out += c.value.to_string(); return;
        case Constant::Kind::Real: {
            std::string dec = c.value.to_decimal_string();
            if (!dec.empty()) {
                out += dec;
                // keep the real kind visible so the text round-trips exactly
                if (dec.find('.') == std::string::npos) out += ".0";
            } else {
                out += c.value.to_string(); // p/q, reparses as a division
            }
            return;
        }
    }
}

void print_expr(const ExprPtr& e, std::string& out) {
    switch (e->kind) {
        case ExprKind::Const: print_const(e->lit, out); return;
        case ExprKind::Var: out += e->var.str(); return;
        case ExprKind::VectorLit: {
            out += '(';
            for (size_t i = 0; i < e->kids.size(); ++i) {
                if (i) out += ", ";
                print_expr(e->kids[i], out);
            }
            if (e->kids.size() == 1) out += ",";
            out += ')';
            return;
        }
        case ExprKind::Index:
            print_child(e->kids[0], 9, out);
            out += '(';
            print_expr(e->kids[1], out);
            out += ')';
            return;
        case ExprKind::TimeDer:
            out += '(';
            print_expr(e->kids[0], out);
            out += ")'";
            return;
        case ExprKind::PartialDer: {
            const ExprPtr& of = e->kids[0];
            if (of->kind == ExprKind::Var && of->var.primes == 0) {
                out += of->var.base;
            } else {
                out += '(';
                print_expr(of, out);
                out += ')';
            }
            out += "'[";
            print_expr(e->kids[1], out);
            out += ']';
            return;
        }
        case ExprKind::Apply: {
            const std::string& fn = e->fn;
            if (is_neg_product(e)) {
                out += '-';
                print_child(e->kids[1], 7, out);
                return;
            }
            int p = fn_prec(fn);
            if (p == 10) {
                out += fn;
                out += '(';
                for (size_t i = 0; i < e->kids.size(); ++i) {
                    if (i) out += ", ";
                    print_expr(e->kids[i], out);
                }
                out += ')';
                return;
            }
            bool right_assoc = fn == "^";
            print_child(e->kids[0], right_assoc ? p + 1 : p, out);
            if (fn == ":") {
                out += ":";
            } else {
                out += ' ';
                out += fn;
                out += ' ';
            }
            print_child(e->kids[1], right_assoc ? p : p + 1, out);
            return;
        }
    }
}

void print_eq(const EqPtr& s, std::string& out, bool top);

void print_eq_list(const std::vector<EqPtr>& items, std::string& out, const char* sep) {
    for (size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        print_eq(items[i], out, false);
    }
}

void print_eq(const EqPtr& s, std::string& out, bool top) {
    switch (s->kind) {
        case EqKind::Directed:
            out += s->lhs->var.str();
            out += " = ";
            print_expr(s->rhs, out);
            return;
        case EqKind::Reset:
            out += s->lhs->var.str();
            out += " += ";
            print_expr(s->rhs, out);
            return;
        case EqKind::Undirected:
            print_expr(s->lhs, out);
            out += " = ";
            print_expr(s->rhs, out);
            return;
        case EqKind::Cond: {
            // branches are braced so the printed form reparses the same way
            // regardless of what follows the conditional
            out += "if ";
            print_expr(s->guard, out);
            out += " then {";
            print_eq_list(s->then_eq->items, out, ", ");
            out += "}";
            if (s->else_eq->items.empty()) {
                out += " noelse";
            } else {
                out += " else {";
                print_eq_list(s->else_eq->items, out, ", ");
                out += "}";
            }
            return;
        }
        case EqKind::Family:
            out += "foreach ";
            out += s->binder->var.str();
            out += " in ";
            print_expr(s->range, out);
            out += " do ";
            print_eq(s->body, out, false);
            return;
        case EqKind::Set: {
            if (top) {
                print_eq_list(s->items, out, ",\n");
                return;
            }
            out += "{";
            print_eq_list(s->items, out, ", ");
            out += "}";
            return;
        }
    }
}

} // namespace

std::string pretty(const ExprPtr& e) {
    std::string out;
    print_expr(e, out);
    return out;
}

std::string pretty(const EqPtr& s) {
    std::string out;
    print_eq(s, out, s->kind == EqKind::Set);
    return out;
}

std::string pretty(const ParsedProgram& p) {
    std::string out;
    print_eq(p.root, out, true);
    out += "\n";
    return out;
}

} // namespace coredel
