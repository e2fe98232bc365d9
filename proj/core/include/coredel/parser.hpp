#pragma once

#include <string>

#include "coredel/ast.hpp"
#include "coredel/errors.hpp"

namespace coredel {

struct ParsedProgram {
    EqPtr root; // a Set node; every node carries its SourceSpan
    std::string filename;
};

// Concrete ASCII syntax -> equation trees. Throws ParseError.
//
// Notes on the grammar beyond the obvious:
//   - `a < b` and `a <= b` parse as the flipped `b > a` / `b >= a`.
//   - `e'` directly after an identifier is a primed variable; after anything
//     else (or detached) it is a time derivative `(e)'`.
//   - `e1'[e2]` is a partial derivative; the prime in front of `[` belongs to
//     the operator, so `x'[t]` differentiates `x`, not `x'`.
//   - `if` branches are equation lists terminated by `else`/`noelse`; the
//     else branch extends to the end of the enclosing scope. `{ ... }` groups.
ParsedProgram parse(const std::string& text, const std::string& filename = "<input>");

std::string pretty(const ExprPtr& e);
std::string pretty(const EqPtr& s);
std::string pretty(const ParsedProgram& p);

} // namespace coredel
