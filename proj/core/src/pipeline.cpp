#include "coredel/pipeline.hpp"

#include <fstream>
#include <sstream>

namespace coredel {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CdlError("Io", "cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Compilation analyze_text(const std::string& text, const std::string& filename) {
    Compilation c;
    c.parsed = parse(text, filename);
    c.env = infer_env(c.parsed.root);
    type_check_eqn(c.env, c.parsed.root);
    c.labeled = label_program(c.parsed.root);
    c.rho = build_global_env(c.labeled);
    c.constraints = gen_constraints(c.labeled, c.rho);
    auto sol = minimal_solution(c.constraints);
    if (auto* conflict = std::get_if<BTAConflict>(&sol))
        throw BtaError("BTAConflict", conflict->message(),
                       conflict->offending.empty() ? SourceSpan{} : conflict->offending[0].span);
    c.sigma = std::get<Substitution>(sol);
    c.annotated = annotate(c.labeled, c.sigma);
    std::vector<BtaViolation> violations = verify_annotation(c.env, c.rho, c.sigma, c.annotated);
    if (!violations.empty())
        throw BtaError("AnnotationViolation",
                       "annotation breaks the declarative rules: " + violations[0].message,
                       violations[0].span);
    return c;
}

Compilation compile_text(const std::string& text, const std::string& filename, const Box& box) {
    Compilation c = analyze_text(text, filename);
    c.residual = specialize_program(c.annotated);
    c.model = build_explicit_model(c.residual, box);
    return c;
}

std::string format_diag(const std::string& filename, const CdlError& err) {
    std::ostringstream os;
    os << filename;
    if (err.span().valid()) os << ":" << err.span().line0 << ":" << err.span().col0;
    os << ": error[" << err.code() << "]: " << err.what();
    return os.str();
}

int exit_code_for(const CdlError& err) {
    if (dynamic_cast<const ParseError*>(&err) || dynamic_cast<const TypeError*>(&err)) return 1;
    if (dynamic_cast<const BtaError*>(&err)) return 2;
    if (dynamic_cast<const SpecError*>(&err)) return 3;
    if (dynamic_cast<const ModelError*>(&err)) return 4;
    return 1;
}

} // namespace coredel
