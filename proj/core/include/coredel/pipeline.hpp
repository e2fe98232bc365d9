#pragma once

#include "coredel/bta.hpp"
#include "coredel/emit.hpp"
#include "coredel/explicitizer.hpp"
#include "coredel/simulate.hpp"

namespace coredel {

struct PipelineConfig {
    std::string input_path;
    std::string output_path; // empty: stdout
    std::string dump;        // "", "bta", "spec", "explicit"
    std::string ranges_path; // optional
};

// everything the pipeline computes, kept for dumps and tests
struct Compilation {
    ParsedProgram parsed;
    TypeEnv env;
    EqPtr labeled;
    GlobalEnv rho;
    ConstraintSet constraints;
    Substitution sigma;
    EqPtr annotated;
    ResidualProgram residual;
    ExplicitModel model;
};

// Stages: parse, type check, label, global env, constraints, minimal
// solution, annotate, verify, specialize, explicitize. Throws ParseError /
// TypeError (exit 1), BtaError (2), SpecError (3), ModelError (4).
Compilation compile_text(const std::string& text, const std::string& filename, const Box& box);

// up to and including annotation verification; used by `check` and `--dump bta`
Compilation analyze_text(const std::string& text, const std::string& filename);

// "file:line:col: error[Code]: message"
std::string format_diag(const std::string& filename, const CdlError& err);

// exit code for a diagnostic: 1 parse/type, 2 binding-time, 3 specialization,
// 4 explicitization
int exit_code_for(const CdlError& err);

std::string read_file(const std::string& path); // throws CdlError("Io")

} // namespace coredel
