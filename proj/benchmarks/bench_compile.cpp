#include <benchmark/benchmark.h>

#include "coredel/pipeline.hpp"

namespace {

using namespace coredel;

std::string model_path(const char* name) {
    return std::string(COREDEL_MODELS_DIR) + "/" + name;
}

void bench_parse(benchmark::State& state, const char* name) {
    std::string text = read_file(model_path(name));
    for (auto _ : state) benchmark::DoNotOptimize(parse(text, name));
}

void bench_analyze(benchmark::State& state, const char* name) {
    std::string text = read_file(model_path(name));
    for (auto _ : state) benchmark::DoNotOptimize(analyze_text(text, name));
}

void bench_compile(benchmark::State& state, const char* name) {
    std::string text = read_file(model_path(name));
    Box box;
    if (std::string(name) == "biped.cdl")
        box = parse_ranges(read_file(model_path("biped.ranges")), "biped.ranges");
    for (auto _ : state) benchmark::DoNotOptimize(compile_text(text, name, box));
}

void bench_simulate_pendulum(benchmark::State& state) {
    Compilation c = compile_text(read_file(model_path("pendulum_pd.cdl")), "pendulum_pd.cdl", Box{});
    NumEnv init = parse_init(read_file(model_path("pendulum_pd.init")), "init");
    for (auto _ : state) benchmark::DoNotOptimize(simulate(c.model, init, 1e-3, 1.0));
}

} // namespace

BENCHMARK_CAPTURE(bench_parse, pendulum, "pendulum.cdl");
BENCHMARK_CAPTURE(bench_parse, biped, "biped.cdl");
BENCHMARK_CAPTURE(bench_analyze, pendulum, "pendulum.cdl");
BENCHMARK_CAPTURE(bench_analyze, biped, "biped.cdl");
BENCHMARK_CAPTURE(bench_compile, pendulum, "pendulum.cdl");
BENCHMARK_CAPTURE(bench_compile, cam, "cam.cdl");
BENCHMARK_CAPTURE(bench_compile, biped, "biped.cdl");
BENCHMARK(bench_simulate_pendulum);

BENCHMARK_MAIN();
