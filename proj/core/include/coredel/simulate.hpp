#pragma once

#include "coredel/explicitizer.hpp"
#include "coredel/numeric.hpp"

namespace coredel {

struct SimResult {
    std::vector<std::string> columns; // "time", then state variables
    std::vector<std::vector<double>> rows;
    size_t events_fired = 0;
};

// Fixed-step RK4 on the first-order form of the model. Guards fire on a
// false-to-true transition; the crossing is located by bisection to within
// 1e-9 s and all reset right-hand sides are evaluated on the pre-reset state.
// Throws CdlError("NonFiniteState") when a value leaves the finite range and
// CdlError("InitMissing") when `init` lacks a state variable.
SimResult simulate(const ExplicitModel& m, const NumEnv& init, double dt, double end);

// one row per line, 17 significant digits, with a header line
std::string to_csv(const SimResult& r);

// init file: lines of `variable value`, `#` comments
NumEnv parse_init(const std::string& text, const std::string& filename = "<init>");

// evaluate the auxiliaries (in order) on top of a state valuation; entries
// that mention the highest derivatives see the current ODE right-hand sides
NumEnv eval_model_env(const ExplicitModel& m, const NumEnv& states);

} // namespace coredel
