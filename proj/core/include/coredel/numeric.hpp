#pragma once

#include "coredel/ast.hpp"
#include "coredel/errors.hpp"

namespace coredel {

using NumEnv = std::map<Variable, double>;

class EvalError : public CdlError {
public:
    using CdlError::CdlError;
};

// Plain double evaluation of scalar expressions. Throws EvalError on unbound
// variables and on vector-shaped subterms.
double eval_num(const ExprPtr& e, const NumEnv& env);
bool eval_bool(const ExprPtr& e, const NumEnv& env);

} // namespace coredel
