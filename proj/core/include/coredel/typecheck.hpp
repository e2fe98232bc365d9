#pragma once

#include "coredel/ast.hpp"
#include "coredel/errors.hpp"

namespace coredel {

// Throws TypeError with codes: UnboundVariable, IndexOutOfBounds,
// ArityMismatch, TypeMismatch, MissingUnprimedBinding.
Type type_check_expr(const TypeEnv& env, const ExprPtr& e);

// Additionally throws GuardNotBool.
void type_check_eqn(const TypeEnv& env, const EqPtr& s);

// Derive the natural environment of a program: directed definitions are typed
// from their right-hand sides, every variable occurring with k primes binds
// all orders 0..k at real, everything else defaults to real.
TypeEnv infer_env(const EqPtr& program);

} // namespace coredel
