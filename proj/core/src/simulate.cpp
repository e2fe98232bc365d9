#include "coredel/simulate.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace coredel {

namespace {

struct Runner {
    const ExplicitModel& m;
    std::vector<Variable> states;
    std::map<Variable, size_t> slot;
    // per state slot: either the slot of the next-higher derivative, or the
    // index of the ODE giving its rate
    std::vector<long> next_slot;
    std::vector<long> ode_index;
    std::set<Variable> unknowns;
    std::vector<bool> aux_needs_unknowns;

    explicit Runner(const ExplicitModel& model) : m(model), states(model.state_vars) {
        for (size_t i = 0; i < states.size(); ++i) slot[states[i]] = i;
        for (const auto& [u, e] : m.odes) {
            (void)e;
            unknowns.insert(u);
        }
        next_slot.assign(states.size(), -1);
        ode_index.assign(states.size(), -1);
        for (size_t i = 0; i < states.size(); ++i) {
            Variable up = states[i].derived();
            auto it = slot.find(up);
            if (it != slot.end()) {
                next_slot[i] = static_cast<long>(it->second);
            } else {
                for (size_t k = 0; k < m.odes.size(); ++k)
                    if (m.odes[k].first == up) ode_index[i] = static_cast<long>(k);
                if (ode_index[i] < 0)
                    throw CdlError("IncompleteModel", "no rate for state '" + states[i].str() + "'");
            }
        }
        for (const auto& [v, e] : m.auxiliaries) {
            (void)v;
            bool needs = false;
            for (const Variable& fv : free_vars(e))
                if (unknowns.count(fv)) needs = true;
            aux_needs_unknowns.push_back(needs);
        }
    }

    NumEnv base_env(const std::vector<double>& x) const {
        NumEnv env;
        for (size_t i = 0; i < states.size(); ++i) env[states[i]] = x[i];
        for (size_t a = 0; a < m.auxiliaries.size(); ++a)
            if (!aux_needs_unknowns[a])
                env[m.auxiliaries[a].first] = eval_num(m.auxiliaries[a].second, env);
        return env;
    }

    std::vector<double> derivs(const std::vector<double>& x) const {
        NumEnv env = base_env(x);
        std::vector<double> rates(m.odes.size());
        for (size_t k = 0; k < m.odes.size(); ++k) rates[k] = eval_num(m.odes[k].second, env);
        std::vector<double> d(states.size());
        for (size_t i = 0; i < states.size(); ++i)
            d[i] = next_slot[i] >= 0 ? x[static_cast<size_t>(next_slot[i])]
                                     : rates[static_cast<size_t>(ode_index[i])];
        return d;
    }

    std::vector<double> rk4(const std::vector<double>& x, double h) const {
        auto axpy = [&](const std::vector<double>& a, double s, const std::vector<double>& b) {
            std::vector<double> r(a.size());
            for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] + s * b[i];
            return r;
        };
        std::vector<double> k1 = derivs(x);
        std::vector<double> k2 = derivs(axpy(x, h / 2, k1));
        std::vector<double> k3 = derivs(axpy(x, h / 2, k2));
        std::vector<double> k4 = derivs(axpy(x, h, k3));
        std::vector<double> r(x.size());
        for (size_t i = 0; i < x.size(); ++i)
            r[i] = x[i] + h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
        return r;
    }

    std::vector<bool> guards(const std::vector<double>& x) const {
        NumEnv env = base_env(x);
        std::vector<bool> g;
        g.reserve(m.events.size());
        for (const EventSpec& ev : m.events) g.push_back(eval_bool(ev.guard, env));
        return g;
    }
};

void check_finite(const std::vector<double>& x, double t) {
    for (double v : x)
        if (!std::isfinite(v))
            throw CdlError("NonFiniteState",
                           "state became non-finite at t = " + std::to_string(t));
}

} // namespace

NumEnv eval_model_env(const ExplicitModel& m, const NumEnv& states) {
    NumEnv env = states;
    // two passes: plain auxiliaries, then ODE rates, then rate-dependent ones
    Runner r(m);
    for (size_t a = 0; a < m.auxiliaries.size(); ++a)
        if (!r.aux_needs_unknowns[a])
            env[m.auxiliaries[a].first] = eval_num(m.auxiliaries[a].second, env);
    for (const auto& [u, e] : m.odes) env[u] = eval_num(e, env);
    for (size_t a = 0; a < m.auxiliaries.size(); ++a)
        if (r.aux_needs_unknowns[a])
            env[m.auxiliaries[a].first] = eval_num(m.auxiliaries[a].second, env);
    return env;
}

SimResult simulate(const ExplicitModel& m, const NumEnv& init, double dt, double end) {
    if (!(dt > 0)) throw CdlError("SimConfig", "dt must be positive");
    if (end < 0) throw CdlError("SimConfig", "end must be nonnegative");
    Runner run(m);

    std::vector<double> x(run.states.size());
    for (size_t i = 0; i < run.states.size(); ++i) {
        auto it = init.find(run.states[i]);
        if (it == init.end())
            throw CdlError("InitMissing",
                           "initial value for '" + run.states[i].str() + "' is missing");
        x[i] = it->second;
    }

    SimResult out;
    out.columns.push_back("time");
    for (const Variable& s : run.states) out.columns.push_back(s.str());

    double t = 0;
    auto emit = [&](double time, const std::vector<double>& st) {
        std::vector<double> row{time};
        row.insert(row.end(), st.begin(), st.end());
        out.rows.push_back(std::move(row));
    };
    emit(t, x);

    std::vector<bool> prev = run.guards(x);
    const double t_eps = 1e-12;

    while (t < end - t_eps) {
        double h = std::min(dt, end - t);
        std::vector<double> x_pre = x;
        std::vector<double> x_next = run.rk4(x, h);
        std::vector<bool> g_next = run.guards(x_next);

        size_t fired = m.events.size();
        for (size_t e = 0; e < m.events.size(); ++e)
            if (!prev[e] && g_next[e]) {
                fired = e;
                break;
            }

        if (fired == m.events.size()) {
            t += h;
            x = std::move(x_next);
            check_finite(x, t);
            emit(t, x);
            prev = std::move(g_next);
            continue;
        }

        // bisect the crossing of the fired guard inside [t, t+h]
        double lo = 0, hi = 1;
        while ((hi - lo) * h > 1e-9) {
            double mid = (lo + hi) / 2;
            std::vector<double> xm = run.rk4(x_pre, mid * h);
            if (run.guards(xm)[fired])
                hi = mid;
            else
                lo = mid;
        }
        double tc = t + hi * h;
        std::vector<double> xc = run.rk4(x_pre, hi * h);

        // resets are simultaneous: every right-hand side sees the pre-reset state
        NumEnv env = run.base_env(xc);
        std::vector<std::pair<size_t, double>> updates;
        for (const ResetSpec& rs : m.events[fired].resets)
            updates.push_back({run.slot.at(rs.var), eval_num(rs.expr, env)});
        for (const auto& [sl, v] : updates) xc[sl] = v;

        ++out.events_fired;
        t = tc;
        x = std::move(xc);
        check_finite(x, t);
        emit(t, x);
        prev = run.guards(x);
        // the fired guard re-arms only after it has been observed false at a
        // step boundary; otherwise a reset that lands on the guard surface
        // chatters without advancing time
        prev[fired] = true;
    }
    return out;
}

std::string to_csv(const SimResult& r) {
    std::string out;
    for (size_t i = 0; i < r.columns.size(); ++i) {
        if (i) out += ',';
        out += r.columns[i];
    }
    out += '\n';
    char buf[64];
    for (const auto& row : r.rows) {
        for (size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            std::snprintf(buf, sizeof buf, "%.17g", row[i]);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

NumEnv parse_init(const std::string& text, const std::string& filename) {
    NumEnv env;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ls(line);
        std::string name;
        double v;
        if (!(ls >> name)) continue;
        if (!(ls >> v))
            throw CdlError("InitFormat",
                           filename + ": line " + std::to_string(lineno) +
                               ": expected `variable value`",
                           {lineno, 1, lineno, 1});
        int primes = 0;
        while (!name.empty() && name.back() == '\'') {
            name.pop_back();
            ++primes;
        }
        env[Variable(name, primes)] = v;
    }
    return env;
}

} // namespace coredel
