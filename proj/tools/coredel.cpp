// coredel: compile differential-equation models to explicit hybrid ODE form
// and run quick fixed-step simulations of the result.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "coredel/pipeline.hpp"

namespace {

using namespace coredel;

int fail(const std::string& filename, const CdlError& err) {
    std::cerr << format_diag(filename, err) << "\n";
    return exit_code_for(err);
}

void write_data(const std::string& path, const std::string& data) {
    if (path.empty()) {
        std::cout << data;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CdlError("Io", "cannot open '" + path + "' for writing");
    out << data;
}

Box load_box(const std::string& ranges_path) {
    if (ranges_path.empty()) return Box{};
    return parse_ranges(read_file(ranges_path), ranges_path);
}

int cmd_check(const std::string& file) {
    try {
        analyze_text(read_file(file), file);
    } catch (const CdlError& err) {
        return fail(file, err);
    }
    std::cout << "ok\n";
    return 0;
}

int cmd_compile(const std::string& file, const std::string& out, const std::string& ranges,
                const std::string& dump) {
    try {
        Box box = load_box(ranges);
        if (dump == "bta") {
            Compilation c = analyze_text(read_file(file), file);
            write_data(out, dump_bta(c.annotated, c.sigma));
            return 0;
        }
        if (dump == "spec") {
            Compilation c = analyze_text(read_file(file), file);
            c.residual = specialize_program(c.annotated);
            write_data(out, pretty(ParsedProgram{c.residual.program, file}));
            return 0;
        }
        Compilation c = compile_text(read_file(file), file, box);
        if (dump == "explicit") {
            write_data(out, dump_explicit(c.model));
            return 0;
        }
        write_data(out, emit_model_string(c.model));
        return 0;
    } catch (const CdlError& err) {
        return fail(file, err);
    }
}

int cmd_simulate(const std::string& file, const std::string& init_path, double dt, double end,
                 const std::string& csv, const std::string& ranges) {
    try {
        ExplicitModel model;
        if (file.size() > 4 && file.substr(file.size() - 4) == ".cdl") {
            model = compile_text(read_file(file), file, load_box(ranges)).model;
        } else {
            model = read_model(read_file(file));
        }
        NumEnv init = parse_init(read_file(init_path), init_path);
        SimResult r = simulate(model, init, dt, end);
        write_data(csv, to_csv(r));
        return 0;
    } catch (const CdlError& err) {
        return fail(file, err);
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"compile-time transformer for hybrid differential-equation models"};
    app.require_subcommand(1);

    std::string file, out, ranges, dump, init_path, csv;
    double dt = 0.001, end = 1.0;

    CLI::App* check = app.add_subcommand("check", "parse, type check and run the binding-time analysis");
    check->add_option("file", file, "input .cdl file")->required();

    CLI::App* compile = app.add_subcommand("compile", "compile a model to explicit hybrid ODE form");
    compile->add_option("file", file, "input .cdl file")->required();
    compile->add_option("-o,--output", out, "model JSON output path (default: stdout)");
    compile->add_option("--ranges", ranges, "variable ranges file for pivot certification");
    compile->add_option("--dump", dump, "stop after a stage: bta | spec | explicit")
        ->check(CLI::IsMember({"bta", "spec", "explicit"}));

    CLI::App* sim = app.add_subcommand("simulate", "fixed-step RK4 simulation with event handling");
    sim->add_option("model", file, "compiled model .json, or a .cdl to compile first")->required();
    sim->add_option("--init", init_path, "initial state file (`variable value` lines)")->required();
    sim->add_option("--dt", dt, "step size in seconds")->required();
    sim->add_option("--end", end, "end time in seconds")->required();
    sim->add_option("--csv", csv, "trajectory output path (default: stdout)");
    sim->add_option("--ranges", ranges, "ranges file, used when compiling a .cdl input");

    CLI11_PARSE(app, argc, argv);

    if (check->parsed()) return cmd_check(file);
    if (compile->parsed()) return cmd_compile(file, out, ranges, dump);
    if (sim->parsed()) return cmd_simulate(file, init_path, dt, end, csv, ranges);
    return 1;
}
