#pragma once

#include "coredel/interval.hpp"
#include "coredel/specializer.hpp"

namespace coredel {

// A * u + b = 0 row-wise; entries never mention the unknowns.
struct LinearSystem {
    std::vector<Variable> unknowns;       // highest-order derivatives, in order
    std::vector<std::vector<ExprPtr>> A;  // one row per equation
    std::vector<ExprPtr> b;
    std::vector<SourceSpan> row_spans;
};

struct ResetSpec {
    Variable var;
    ExprPtr expr;
};

struct EventSpec {
    ExprPtr guard;
    std::vector<ResetSpec> resets;
};

struct ExplicitModel {
    std::map<std::string, Rational> parameters;
    std::vector<std::pair<Variable, ExprPtr>> auxiliaries; // evaluated in order
    std::vector<std::pair<Variable, ExprPtr>> odes;        // highest derivative -> rhs
    std::vector<EventSpec> events;
    std::vector<Variable> state_vars; // all orders below each unknown, in unknown order
};

// Highest derivative order per base variable over the continuous equations;
// base order follows first appearance in the residual program.
std::vector<Variable> collect_unknowns(const EqPtr& residual);

// Throws ModelError with codes NonlinearInUnknowns / DimensionMismatch.
// rows are continuous equations in lhs - rhs = 0 form.
LinearSystem extract_linear_system(const std::vector<ExprPtr>& rows,
                                   const std::vector<Variable>& unknowns,
                                   const std::vector<SourceSpan>& row_spans = {});

// Full-pivot symbolic elimination. Pivots are chosen by maximal mignitude of
// their interval over `box` (auxiliary definitions expanded first) and must
// exclude zero; otherwise throws ModelError("PivotUncertain"). Solutions are
// back-substituted, simplified, and numerically verified against the system.
std::map<Variable, ExprPtr> gaussian_eliminate(
    const LinearSystem& sys, const Box& box,
    const std::vector<std::pair<Variable, ExprPtr>>& aux = {},
    std::vector<std::pair<ExprPtr, Interval>>* used_pivots = nullptr);

// Residual program -> explicit model: parameters, retained outputs, shared
// trig subexpressions as auxiliaries, explicit ODEs, guard/reset events.
ExplicitModel build_explicit_model(const ResidualProgram& residual, const Box& box);

std::string dump_explicit(const ExplicitModel& m);

} // namespace coredel
