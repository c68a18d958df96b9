#pragma once

// Built-in systems selected by name with named real parameters. Unknown
// names or parameters are configuration errors.

#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "rotdeg/error.hpp"
#include "rotdeg/example_family.hpp"
#include "rotdeg/fields.hpp"

namespace rotdeg {

struct SystemSelection {
    std::string name;
    std::map<std::string, double> params;
};

/// Parameter names and defaults of every built-in.
inline const std::map<std::string, std::map<std::string, double>>& builtin_defaults()
{
    static const std::map<std::string, std::map<std::string, double>> table = [] {
        const ExampleParams ep;
        return std::map<std::string, std::map<std::string, double>>{
            {"linear_clockwise", {{"period", two_pi}}},
            {"radial_power", {{"alpha", 2.0}, {"period", std::numbers::pi}}},
            {"duffing", {{"amp", 0.5}, {"omega", 1.0}}},
            {"example_family",
             {{"alpha", ep.alpha},
              {"beta", ep.beta},
              {"sigma0", ep.sigma0},
              {"blowup_time", ep.blowup_time},
              {"period", ep.period},
              {"epsilon", ep.epsilon},
              {"slope_support", ep.slope_support}}},
        };
    }();
    return table;
}

inline std::vector<std::string> builtin_names()
{
    std::vector<std::string> out;
    for (const auto& [k, v] : builtin_defaults()) {
        out.push_back(k);
    }
    return out;
}

/// Defaults overlaid with the selection's parameters.
inline std::map<std::string, double> resolved_params(const SystemSelection& sel)
{
    const auto& table = builtin_defaults();
    const auto it = table.find(sel.name);
    if (it == table.end()) {
        throw Error(ErrorCode::InvalidConfig, "unknown system '" + sel.name + "'");
    }
    auto p = it->second;
    for (const auto& [k, v] : sel.params) {
        if (!p.contains(k)) {
            throw Error(ErrorCode::InvalidConfig, "system '" + sel.name + "' has no parameter '" + k + "'");
        }
        p[k] = v;
    }
    return p;
}

inline ExampleParams example_params(const SystemSelection& sel)
{
    if (sel.name != "example_family") {
        throw Error(ErrorCode::InvalidConfig, "system '" + sel.name + "' is not the example family");
    }
    const auto p = resolved_params(sel);
    ExampleParams ep;
    ep.alpha = p.at("alpha");
    ep.beta = p.at("beta");
    ep.sigma0 = p.at("sigma0");
    ep.blowup_time = p.at("blowup_time");
    ep.period = p.at("period");
    ep.epsilon = p.at("epsilon");
    ep.slope_support = p.at("slope_support");
    return ep;
}

/// Parameter errors of the underlying constructors are reported as
/// configuration errors.
inline FieldSpec make_builtin(const SystemSelection& sel)
{
    const auto p = resolved_params(sel);
    try {
        if (sel.name == "linear_clockwise") {
            return linear_clockwise(p.at("period"));
        }
        if (sel.name == "radial_power") {
            return radial_power(p.at("alpha"), p.at("period"));
        }
        if (sel.name == "duffing") {
            return duffing_field(p.at("amp"), p.at("omega"));
        }
        return make_example_field(example_params(sel));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::InvalidParams) {
            throw Error(ErrorCode::InvalidConfig, e.what());
        }
        throw;
    }
}

}  // namespace rotdeg
