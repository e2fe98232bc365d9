#include "coredel/emit.hpp"

#include <fstream>

#include <json.hpp>

namespace coredel {

namespace {

using nlohmann::json;

std::string rat_str(const Rational& r) { return r.num().to_string() + "/" + r.den().to_string(); }

Rational rat_parse(const std::string& s) {
    size_t slash = s.find('/');
    if (slash == std::string::npos) return Rational::from_decimal_string(s);
    std::string num = s.substr(0, slash), den = s.substr(slash + 1);
    bool nneg = !num.empty() && num[0] == '-';
    if (nneg) num = num.substr(1);
    BigInt n = BigInt::from_decimal(num);
    if (nneg) n = -n;
    return Rational(n, BigInt::from_decimal(den));
}

json expr_to_json(const ExprPtr& e) {
    switch (e->kind) {
        case ExprKind::Const:
            switch (e->lit.kind) {
                case Constant::Kind::Nat:
                case Constant::Kind::Real: return json::array({"num", rat_str(e->lit.value)});
                case Constant::Kind::Bool: return json::array({"bool", e->lit.bval});
                case Constant::Kind::Pi: return json::array({"pi"});
            }
            break;
        case ExprKind::Var: return json::array({"var", e->var.str()});
        case ExprKind::Apply: {
            json a = json::array({e->fn});
            for (const auto& k : e->kids) a.push_back(expr_to_json(k));
            return a;
        }
        default: break;
    }
    throw ModelError("EmitUnsupported", "expression form cannot appear in a compiled model",
                     e->span);
}

ExprPtr expr_from_json(const json& j) {
    if (!j.is_array() || j.empty() || !j[0].is_string())
        throw CdlError("ModelFormat", "malformed expression node");
    std::string head = j[0].get<std::string>();
    if (head == "num") return mk_const(Constant::real(rat_parse(j.at(1).get<std::string>())));
    if (head == "bool") return mk_const(Constant::boolean(j.at(1).get<bool>()));
    if (head == "pi") return mk_const(Constant::pi());
    if (head == "var") {
        std::string name = j.at(1).get<std::string>();
        int primes = 0;
        while (!name.empty() && name.back() == '\'') {
            name.pop_back();
            ++primes;
        }
        return mk_var(Variable(name, primes));
    }
    if (!builtin_info(head)) throw CdlError("ModelFormat", "unknown operator '" + head + "'");
    std::vector<ExprPtr> kids;
    for (size_t i = 1; i < j.size(); ++i) kids.push_back(expr_from_json(j[i]));
    return mk_apply(head, std::move(kids));
}

Variable var_parse(const std::string& s) {
    std::string name = s;
    int primes = 0;
    while (!name.empty() && name.back() == '\'') {
        name.pop_back();
        ++primes;
    }
    return Variable(name, primes);
}

} // namespace

std::string emit_model_string(const ExplicitModel& m) {
    json j;
    j["version"] = 1;
    json params = json::object();
    for (const auto& [name, v] : m.parameters) params[name] = rat_str(v);
    j["params"] = params;
    json aux = json::array();
    for (const auto& [v, e] : m.auxiliaries)
        aux.push_back(json{{"var", v.str()}, {"expr", expr_to_json(e)}});
    j["aux"] = aux;
    json odes = json::array();
    for (const auto& [v, e] : m.odes)
        odes.push_back(json{{"var", v.str()}, {"expr", expr_to_json(e)}});
    j["odes"] = odes;
    json events = json::array();
    for (const EventSpec& ev : m.events) {
        json resets = json::array();
        for (const ResetSpec& rs : ev.resets)
            resets.push_back(json{{"var", rs.var.str()}, {"expr", expr_to_json(rs.expr)}});
        events.push_back(json{{"guard", expr_to_json(ev.guard)}, {"resets", resets}});
    }
    j["events"] = events;
    json states = json::array();
    for (const Variable& v : m.state_vars) states.push_back(v.str());
    j["states"] = states;
    return j.dump(2) + "\n";
}

void emit_model(const ExplicitModel& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CdlError("Io", "cannot open '" + path + "' for writing");
    out << emit_model_string(m);
}

ExplicitModel read_model(const std::string& json_text) {
    json j = json::parse(json_text);
    if (!j.contains("version") || j["version"].get<int>() != 1)
        throw CdlError("ModelFormat", "unsupported model version");
    ExplicitModel m;
    for (auto it = j["params"].begin(); it != j["params"].end(); ++it)
        m.parameters[it.key()] = rat_parse(it.value().get<std::string>());
    for (const json& a : j["aux"])
        m.auxiliaries.push_back(
            {var_parse(a.at("var").get<std::string>()), expr_from_json(a.at("expr"))});
    for (const json& o : j["odes"])
        m.odes.push_back({var_parse(o.at("var").get<std::string>()), expr_from_json(o.at("expr"))});
    for (const json& ev : j["events"]) {
        EventSpec e;
        e.guard = expr_from_json(ev.at("guard"));
        for (const json& rs : ev.at("resets"))
            e.resets.push_back(
                {var_parse(rs.at("var").get<std::string>()), expr_from_json(rs.at("expr"))});
        m.events.push_back(std::move(e));
    }
    for (const json& s : j["states"]) m.state_vars.push_back(var_parse(s.get<std::string>()));
    return m;
}

} // namespace coredel
