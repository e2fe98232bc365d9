#pragma once

#include <iosfwd>

#include "coredel/explicitizer.hpp"

namespace coredel {

// Versioned, deterministic JSON document:
//   {"version":1, "params":{name:"p/q"}, "aux":[{"var":..,"expr":..}],
//    "odes":[{"var":"x''","expr":..}],
//    "events":[{"guard":..,"resets":[{"var":..,"expr":..}]}], "states":[..]}
// Expressions serialize as nested arrays ["op", child...] with leaves
// ["var", name], ["num", "p/q"], ["bool", b] and ["pi"]. Keys are sorted and
// numbers are exact strings, so output is byte-stable across runs.
std::string emit_model_string(const ExplicitModel& m);
void emit_model(const ExplicitModel& m, const std::string& path);

ExplicitModel read_model(const std::string& json_text);

} // namespace coredel
