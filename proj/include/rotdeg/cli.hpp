#pragma once

// Batch front end: `rotdeg <command> <config.json>` or `rotdeg --print-schema`.
// The configuration is validated against the schema before any computation;
// outputs are assembled in memory and written atomically at the end, so a
// failing run leaves no files behind.
//
// Exit codes: 0 success, 1 unexpected failure, 2 configuration error,
// 3 integration error, 4 inconclusive (boundary not admissible, no
// convergence, contour not found).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rotdeg/builtins.hpp"
#include "rotdeg/conditions.hpp"
#include "rotdeg/degree.hpp"
#include "rotdeg/error.hpp"
#include "rotdeg/example_family.hpp"
#include "rotdeg/integrator.hpp"
#include "rotdeg/loop.hpp"
#include "rotdeg/output.hpp"
#include "rotdeg/rotation.hpp"

namespace rotdeg::cli {

using Json = nlohmann::ordered_json;

enum ExitCode { kOk = 0, kFailure = 1, kConfigError = 2, kIntegrationError = 3, kInconclusive = 4 };

inline constexpr const char* kOutputDirEnv = "ROTDEG_OUTPUT_DIR";

inline int exit_code_for(ErrorCode code)
{
    switch (code) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidParams:
    case ErrorCode::MissingHamiltonian:
    case ErrorCode::OutOfTimeDomain: return kConfigError;
    case ErrorCode::NotAdmissible:
    case ErrorCode::NoConvergence:
    case ErrorCode::LevelNotBracketed:
    case ErrorCode::ContourBroken:
    case ErrorCode::ZeroOnLoop: return kInconclusive;
    default: return kIntegrationError;
    }
}

// ---------------------------------------------------------------------------
// Schema

inline const Json& schema()
{
    static const Json s = Json::parse(R"json(
{
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "title": "rotdeg run configuration",
  "type": "object",
  "additionalProperties": false,
  "required": ["system"],
  "$defs": {
    "point": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
    "loop": {
      "description": "Exactly one of circle, polygon or level.",
      "type": "object",
      "additionalProperties": false,
      "minProperties": 1,
      "maxProperties": 1,
      "properties": {
        "circle": {
          "type": "object", "additionalProperties": false, "required": ["radius"],
          "properties": {
            "center": {"$ref": "#/$defs/point"},
            "radius": {"type": "number", "exclusiveMinimum": 0}
          }
        },
        "polygon": {"type": "array", "items": {"$ref": "#/$defs/point"}, "minItems": 3},
        "level": {
          "description": "Contour GRot_T = level over an annulus, level = n + 1/2.",
          "type": "object", "additionalProperties": false, "required": ["level", "r_inner", "r_outer"],
          "properties": {
            "level": {"type": "number"},
            "r_inner": {"type": "number", "exclusiveMinimum": 0},
            "r_outer": {"type": "number", "exclusiveMinimum": 0},
            "n_r": {"type": "integer", "minimum": 2},
            "n_phi": {"type": "integer", "minimum": 8}
          }
        }
      }
    },
    "rho_sampling": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "rho_lo": {"type": "number", "exclusiveMinimum": 0},
        "rho_hi": {"type": "number", "exclusiveMinimum": 0},
        "grid_samples": {"type": "integer", "minimum": 0},
        "reference_samples": {"type": "integer", "minimum": 0}
      }
    },
    "positive_list": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1}
  },
  "properties": {
    "system": {
      "type": "object", "additionalProperties": false, "required": ["name"],
      "properties": {
        "name": {"type": "string", "enum": ["duffing", "example_family", "linear_clockwise", "radial_power"]},
        "params": {"type": "object", "additionalProperties": {"type": "number"}}
      }
    },
    "integrator": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "rtol": {"type": "number", "exclusiveMinimum": 0},
        "atol": {"type": "number", "exclusiveMinimum": 0},
        "h_min": {"type": "number", "exclusiveMinimum": 0},
        "escape_radius": {"type": "number", "exclusiveMinimum": 0},
        "origin_radius": {"type": "number", "exclusiveMinimum": 0},
        "max_steps": {"type": "integer", "minimum": 1},
        "max_sample_turn": {"type": "number", "exclusiveMinimum": 0},
        "use_reference": {"type": "boolean"}
      }
    },
    "seed": {"type": "integer", "minimum": 0},
    "output_dir": {"type": "string"},
    "integrate": {
      "type": "object", "additionalProperties": false, "required": ["z0"],
      "properties": {
        "z0": {"$ref": "#/$defs/point"},
        "t0": {"type": "number"},
        "t_end": {"type": "number"}
      }
    },
    "profile": {
      "type": "object", "additionalProperties": false, "required": ["loop"],
      "properties": {
        "loop": {"$ref": "#/$defs/loop"},
        "initial": {"type": "integer", "minimum": 3},
        "max_points": {"type": "integer", "minimum": 3},
        "max_jump": {"type": "number", "exclusiveMinimum": 0}
      }
    },
    "find_periodic": {
      "type": "object", "additionalProperties": false, "required": ["loop"],
      "properties": {
        "loop": {"$ref": "#/$defs/loop"},
        "region": {"$ref": "#/$defs/loop"},
        "margin": {"type": "number", "exclusiveMinimum": 0},
        "max_cells": {"type": "integer", "minimum": 1},
        "min_cell": {"type": "number", "exclusiveMinimum": 0},
        "residual_tol": {"type": "number", "exclusiveMinimum": 0},
        "max_polish": {"type": "integer", "minimum": 1},
        "return_periods": {"type": "integer", "minimum": 1}
      }
    },
    "verify": {
      "type": "object", "additionalProperties": false, "required": ["checks"],
      "properties": {
        "checks": {
          "type": "array", "minItems": 1,
          "items": {"type": "string", "enum": ["star", "A4", "A5", "A6", "H1", "H2", "growth"]}
        },
        "star": {
          "type": "object", "additionalProperties": false,
          "properties": {
            "T": {"type": "number", "exclusiveMinimum": 0},
            "c_min": {"type": "number", "exclusiveMinimum": 0},
            "c_max": {"type": "number", "exclusiveMinimum": 0},
            "samples": {"type": "integer", "minimum": 1}
          }
        },
        "A4": {
          "type": "object", "additionalProperties": false,
          "properties": {
            "seeds": {"type": "array", "items": {"$ref": "#/$defs/point"}},
            "special_seed": {"type": "boolean"},
            "threshold": {"type": "number"},
            "escape_radii": {"$ref": "#/$defs/positive_list"}
          }
        },
        "A5": {
          "type": "object", "additionalProperties": false,
          "properties": {
            "rho_ladder": {"$ref": "#/$defs/positive_list"},
            "angles": {"type": "integer", "minimum": 1},
            "targets": {"type": "integer", "minimum": 1}
          }
        },
        "A6": {
          "type": "object", "additionalProperties": false,
          "properties": {
            "radii": {"$ref": "#/$defs/positive_list"},
            "time_mesh": {"type": "array", "items": {"type": "number"}, "minItems": 1},
            "samples_per_annulus": {"type": "integer", "minimum": 1}
          }
        },
        "H": {"$ref": "#/$defs/rho_sampling"},
        "growth": {
          "type": "object", "additionalProperties": false,
          "properties": {"radii": {"$ref": "#/$defs/positive_list"}}
        }
      }
    },
    "sweep": {
      "type": "object", "additionalProperties": false, "required": ["alpha", "beta"],
      "properties": {
        "alpha": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "beta": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "rot_threshold": {"type": "number"},
        "escape_radii": {"$ref": "#/$defs/positive_list"},
        "H": {"$ref": "#/$defs/rho_sampling"}
      }
    },
    "d_delta": {
      "type": "object", "additionalProperties": false, "required": ["deltas"],
      "properties": {
        "deltas": {"$ref": "#/$defs/positive_list"},
        "n_t": {"type": "integer", "minimum": 1},
        "n_boundary": {"type": "integer", "minimum": 3},
        "n_rings": {"type": "integer", "minimum": 1}
      }
    }
  }
}
)json");
    return s;
}

namespace detail {

/// Validator for the subset of JSON Schema used above.
inline void validate_node(const Json& v, const Json& s, const std::string& path)
{
    auto fail = [&](const std::string& why) {
        throw Error(ErrorCode::InvalidConfig, (path.empty() ? std::string("config") : path) + ": " + why);
    };
    if (s.contains("$ref")) {
        const std::string ref = s["$ref"];
        const std::string prefix = "#/$defs/";
        validate_node(v, schema()["$defs"][ref.substr(prefix.size())], path);
        return;
    }
    if (s.contains("type")) {
        const std::string t = s["type"];
        const bool ok = (t == "object" && v.is_object()) || (t == "array" && v.is_array()) ||
                        (t == "string" && v.is_string()) || (t == "boolean" && v.is_boolean()) ||
                        (t == "number" && v.is_number()) ||
                        (t == "integer" && (v.is_number_integer() ||
                                            (v.is_number_float() && std::trunc(v.get<double>()) == v.get<double>())));
        if (!ok) {
            fail("expected " + t);
        }
    }
    if (s.contains("enum")) {
        bool found = false;
        for (const auto& e : s["enum"]) {
            found = found || e == v;
        }
        if (!found) {
            fail("value " + v.dump() + " is not one of " + s["enum"].dump());
        }
    }
    if (v.is_number()) {
        const double x = v.get<double>();
        if (!std::isfinite(x)) {
            fail("number must be finite");
        }
        if (s.contains("minimum") && x < s["minimum"].get<double>()) {
            fail("must be >= " + s["minimum"].dump());
        }
        if (s.contains("exclusiveMinimum") && !(x > s["exclusiveMinimum"].get<double>())) {
            fail("must be > " + s["exclusiveMinimum"].dump());
        }
    }
    if (v.is_array()) {
        if (s.contains("minItems") && v.size() < s["minItems"].get<std::size_t>()) {
            fail("needs at least " + s["minItems"].dump() + " items");
        }
        if (s.contains("maxItems") && v.size() > s["maxItems"].get<std::size_t>()) {
            fail("allows at most " + s["maxItems"].dump() + " items");
        }
        if (s.contains("items")) {
            for (std::size_t i = 0; i < v.size(); ++i) {
                validate_node(v[i], s["items"], path + "[" + std::to_string(i) + "]");
            }
        }
    }
    if (v.is_object()) {
        if (s.contains("minProperties") && v.size() < s["minProperties"].get<std::size_t>()) {
            fail("needs at least " + s["minProperties"].dump() + " keys");
        }
        if (s.contains("maxProperties") && v.size() > s["maxProperties"].get<std::size_t>()) {
            fail("allows at most " + s["maxProperties"].dump() + " keys");
        }
        if (s.contains("required")) {
            for (const auto& r : s["required"]) {
                if (!v.contains(r.get<std::string>())) {
                    fail("missing required key '" + r.get<std::string>() + "'");
                }
            }
        }
        const Json props = s.value("properties", Json::object());
        for (const auto& [k, item] : v.items()) {
            const std::string sub = path.empty() ? k : path + "." + k;
            if (props.contains(k)) {
                validate_node(item, props[k], sub);
            } else if (s.contains("additionalProperties")) {
                const auto& ap = s["additionalProperties"];
                if (ap.is_boolean()) {
                    if (!ap.get<bool>()) {
                        fail("unknown key '" + k + "'");
                    }
                } else {
                    validate_node(item, ap, sub);
                }
            }
        }
    }
}

}  // namespace detail

inline void validate_config(const Json& cfg) { detail::validate_node(cfg, schema(), ""); }

// ---------------------------------------------------------------------------
// Typed views of the configuration

namespace detail {

inline PlanarPoint to_point(const Json& j) { return {j[0].get<double>(), j[1].get<double>()}; }

inline std::vector<double> to_list(const Json& j)
{
    std::vector<double> out;
    for (const auto& x : j) {
        out.push_back(x.get<double>());
    }
    return out;
}

inline Json jnum(double v)
{
    if (std::isfinite(v)) {
        return v;
    }
    return format_number(v);
}

inline Json jpoint(PlanarPoint p) { return Json::array({jnum(p.x), jnum(p.y)}); }

inline SystemSelection system_of(const Json& cfg)
{
    SystemSelection sel;
    sel.name = cfg["system"]["name"].get<std::string>();
    if (cfg["system"].contains("params")) {
        for (const auto& [k, v] : cfg["system"]["params"].items()) {
            sel.params[k] = v.get<double>();
        }
    }
    return sel;
}

inline Json system_json(const SystemSelection& sel)
{
    Json params = Json::object();
    for (const auto& [k, v] : resolved_params(sel)) {
        params[k] = jnum(v);
    }
    return Json{{"name", sel.name}, {"params", params}};
}

inline IntegratorConfig integrator_of(const Json& cfg)
{
    IntegratorConfig c;
    if (cfg.contains("integrator")) {
        const auto& j = cfg["integrator"];
        c.rtol = j.value("rtol", c.rtol);
        c.atol = j.value("atol", c.atol);
        c.h_min = j.value("h_min", c.h_min);
        c.escape_radius = j.value("escape_radius", c.escape_radius);
        c.origin_radius = j.value("origin_radius", c.origin_radius);
        c.max_steps = j.value("max_steps", c.max_steps);
        c.max_sample_turn = j.value("max_sample_turn", c.max_sample_turn);
        c.use_reference = j.value("use_reference", c.use_reference);
    }
    c.validate();
    return c;
}

inline Json loop_json(const Loop& loop)
{
    if (loop.kind() == Loop::Kind::Circle) {
        return Json{{"kind", "circle"}, {"center", jpoint(loop.center())}, {"radius", jnum(loop.radius())}};
    }
    Json v = Json::array();
    for (const auto& p : loop.vertices()) {
        v.push_back(jpoint(p));
    }
    return Json{{"kind", "polygon"}, {"vertices", v}};
}

/// Level loops need the field and integrator and may raise
/// LevelNotBracketed or ContourBroken.
inline Loop loop_of(const Json& j, const FieldSpec& spec, const IntegratorConfig& cfg)
{
    if (j.contains("circle")) {
        const auto& c = j["circle"];
        return Loop::circle(c.contains("center") ? to_point(c["center"]) : PlanarPoint{}, c["radius"].get<double>());
    }
    if (j.contains("polygon")) {
        std::vector<PlanarPoint> v;
        for (const auto& p : j["polygon"]) {
            v.push_back(to_point(p));
        }
        return Loop::polygon(std::move(v));
    }
    const auto& l = j["level"];
    LevelGrid grid;
    grid.r_inner = l["r_inner"].get<double>();
    grid.r_outer = l["r_outer"].get<double>();
    grid.n_r = l.value("n_r", grid.n_r);
    grid.n_phi = l.value("n_phi", grid.n_phi);
    if (!(grid.r_outer > grid.r_inner)) {
        throw Error(ErrorCode::InvalidConfig, "level loop needs r_outer > r_inner");
    }
    return build_level_boundary(spec, l["level"].get<double>(), grid, cfg).loop;
}

inline Json verdict_json(const ConditionVerdict& v)
{
    Json cert = Json::object();
    for (const auto& [k, x] : v.certificate) {
        cert[k] = jnum(x);
    }
    Json w = nullptr;
    if (v.witness) {
        w = Json{{"t", jnum(v.witness->t)}, {"x", jnum(v.witness->z.x)}, {"y", jnum(v.witness->z.y)}};
    }
    return Json{{"condition", v.condition},
                {"holds_at_resolution", v.holds_at_resolution},
                {"certificate", cert},
                {"witness", w},
                {"note", v.note}};
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

inline RhoSampling rho_sampling_of(const Json& parent, std::uint64_t seed)
{
    RhoSampling s;
    s.seed = seed;
    if (parent.contains("H")) {
        const auto& h = parent["H"];
        s.rho_lo = h.value("rho_lo", s.rho_lo);
        s.rho_hi = h.value("rho_hi", s.rho_hi);
        s.grid_samples = h.value("grid_samples", s.grid_samples);
        s.reference_samples = h.value("reference_samples", s.reference_samples);
    }
    if (!(s.rho_hi > s.rho_lo)) {
        throw Error(ErrorCode::InvalidConfig, "H sampling needs rho_hi > rho_lo");
    }
    return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands. Each returns the files to write and an exit code.

struct CommandResult {
    std::vector<std::pair<std::string, std::string>> files;
    int exit_code = kOk;
    std::string message;
};

inline CommandResult cmd_integrate(const Json& cfg)
{
    if (!cfg.contains("integrate")) {
        throw Error(ErrorCode::InvalidConfig, "integrate needs an 'integrate' section");
    }
    const auto sel = detail::system_of(cfg);
    const FieldSpec spec = make_builtin(sel);
    IntegratorConfig ic = detail::integrator_of(cfg);
    const auto& sec = cfg["integrate"];
    const PlanarPoint z0 = detail::to_point(sec["z0"]);
    const double t0 = sec.value("t0", 0.0);
    ic.t_end = sec.value("t_end", t0 + spec.period);
    const Trajectory tr = integrate(spec, z0, t0, ic);

    const auto& cls = tr.classification();
    Json c{{"outcome", to_string(cls.outcome)}, {"t_event", detail::jnum(cls.t_event)}};
    if (cls.outcome == Outcome::BlowUp) {
        c["t_f_est"] = detail::jnum(cls.t_event);
        c["t_escape"] = detail::jnum(cls.t_escape);
        c["fit_exponent"] = detail::jnum(cls.fit_exponent);
        c["fit_residual"] = detail::jnum(cls.fit_residual);
    }
    Json summary{{"command", "integrate"},
                 {"system", detail::system_json(sel)},
                 {"z0", detail::jpoint(z0)},
                 {"t0", detail::jnum(t0)},
                 {"t_end", detail::jnum(ic.t_end)},
                 {"classification", c},
                 {"t_stop", detail::jnum(tr.t_stop())},
                 {"final_state", detail::jpoint(tr.final_state())},
                 {"final_rot", detail::jnum(tr.final_rot())},
                 {"final_lift_rot", tr.lift().empty() ? Json(nullptr) : detail::jnum(tr.lift_rot(tr.lift().size() - 1))},
                 {"samples", tr.samples().size()},
                 {"steps", tr.steps()},
                 {"rejected_steps", tr.rejected()},
                 {"used_reference", tr.used_reference()}};
    return {{{"trajectory.csv", trajectory_csv(tr)}, {"summary.json", detail::dump(summary)}}, kOk, ""};
}

inline CommandResult cmd_profile(const Json& cfg)
{
    if (!cfg.contains("profile")) {
        throw Error(ErrorCode::InvalidConfig, "profile needs a 'profile' section");
    }
    const auto sel = detail::system_of(cfg);
    const FieldSpec spec = make_builtin(sel);
    const IntegratorConfig ic = detail::integrator_of(cfg);
    const auto& sec = cfg["profile"];
    ProfileOptions opt;
    opt.initial = sec.value("initial", opt.initial);
    opt.max_points = sec.value("max_points", opt.max_points);
    opt.max_jump = sec.value("max_jump", opt.max_jump);
    const Loop loop = detail::loop_of(sec["loop"], spec, ic);
    const RotationProfile prof = rotation_profile(spec, loop, ic, opt);
    double lo = rotdeg::detail::kInf;
    double hi = -rotdeg::detail::kInf;
    std::size_t infinite = 0;
    for (const auto& s : prof.samples) {
        if (s.grot.is_infinite()) {
            ++infinite;
        } else {
            lo = std::min(lo, s.grot.value);
            hi = std::max(hi, s.grot.value);
        }
    }
    Json summary{{"command", "profile"},
                 {"system", detail::system_json(sel)},
                 {"loop", detail::loop_json(loop)},
                 {"samples", prof.samples.size()},
                 {"infinite_samples", infinite},
                 {"grot_min", detail::jnum(lo)},
                 {"grot_max", detail::jnum(hi)},
                 {"refinement_capped", prof.refinement_capped}};
    return {{{"profile.csv", profile_csv(prof.samples)}, {"profile.json", detail::dump(summary)}}, kOk, ""};
}

inline CommandResult cmd_find_periodic(const Json& cfg)
{
    if (!cfg.contains("find_periodic")) {
        throw Error(ErrorCode::InvalidConfig, "find-periodic needs a 'find_periodic' section");
    }
    const auto sel = detail::system_of(cfg);
    const FieldSpec spec = make_builtin(sel);
    const IntegratorConfig ic = detail::integrator_of(cfg);
    const auto& sec = cfg["find_periodic"];
    const Loop loop = detail::loop_of(sec["loop"], spec, ic);
    const Loop region = sec.contains("region") ? detail::loop_of(sec["region"], spec, ic) : loop;
    HarnessOptions hopt;
    hopt.margin_required = sec.value("margin", hopt.margin_required);
    FixedPointOptions fopt;
    fopt.max_cells = sec.value("max_cells", fopt.max_cells);
    fopt.min_cell = sec.value("min_cell", fopt.min_cell);
    fopt.residual_tol = sec.value("residual_tol", fopt.residual_tol);
    fopt.max_polish = sec.value("max_polish", fopt.max_polish);
    const int periods = sec.value("return_periods", 2);

    const DegreeReport rep = theorem1_harness(spec, loop, ic, hopt);
    CommandResult res;
    std::optional<FixedPointSearch> search;
    std::string search_error;
    if (rep.admissible && rep.winding) {
        try {
            search = find_fixed_points(spec, region, ic, fopt);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NoConvergence) {
                throw;
            }
            search_error = e.what();
        }
    }

    Json samples = Json::array();
    Portrait portrait;
    for (const auto& s : rep.samples) {
        samples.push_back(Json{{"s", detail::jnum(s.s)},
                               {"x", detail::jnum(s.z.x)},
                               {"y", detail::jnum(s.z.y)},
                               {"grot", to_string(s.grot)},
                               {"outcome", to_string(s.outcome)},
                               {"image", s.image ? detail::jpoint(*s.image) : Json(nullptr)}});
        portrait.loop.push_back(s.z);
        if (s.image) {
            portrait.image.push_back(*s.image);
        }
    }
    if (!portrait.loop.empty()) {
        portrait.loop.push_back(portrait.loop.front());
    }
    if (!portrait.image.empty() && portrait.image.size() + 1 == portrait.loop.size()) {
        portrait.image.push_back(portrait.image.front());
    }
    const std::size_t stride = std::max<std::size_t>(1, rep.samples.size() / 48);
    for (std::size_t i = 0; i < rep.samples.size(); i += stride) {
        if (rep.samples[i].image) {
            portrait.arrows.push_back({rep.samples[i].z, *rep.samples[i].image});
        }
    }

    Json fps = Json::array();
    std::string fp_csv = csv_row({"x", "y", "residual", "return_error"});
    if (search) {
        IntegratorConfig back = ic;
        back.detect_origin = false;
        back.t_end = periods * spec.period;
        for (const auto& p : search->points) {
            const Trajectory tr = integrate(spec, p.z, 0.0, back);
            const double ret = tr.outcome() == Outcome::Complete ? norm(tr.final_state() - p.z) : rotdeg::detail::kInf;
            fps.push_back(Json{{"x", detail::jnum(p.z.x)},
                               {"y", detail::jnum(p.z.y)},
                               {"residual", detail::jnum(p.residual)},
                               {"return_error", detail::jnum(ret)}});
            fp_csv += csv_row({format_number(p.z.x), format_number(p.z.y), format_number(p.residual), format_number(ret)});
            portrait.fixed_points.push_back(p.z);
            std::vector<PlanarPoint> orbit;
            for (const auto& s : tr.samples()) {
                orbit.push_back(s.z);
            }
            portrait.trajectories.push_back(std::move(orbit));
        }
    }

    Json report{{"command", "find-periodic"},
                {"system", detail::system_json(sel)},
                {"loop", detail::loop_json(loop)},
                {"region", detail::loop_json(region)},
                {"admissible", rep.admissible},
                {"reason", rep.reason},
                {"band", Json{{"n", rep.band_n}, {"margin", detail::jnum(rep.margin)}}},
                {"margin_required", detail::jnum(hopt.margin_required)},
                {"winding", rep.winding ? Json(*rep.winding) : Json(nullptr)},
                {"discrepancy", rep.discrepancy},
                {"refinement_capped", rep.refinement_capped},
                {"samples", samples},
                {"fixed_points", fps}};
    if (search) {
        report["search"] = Json{{"cells_processed", search->cells_processed},
                                {"candidate_cells", search->candidates.size()},
                                {"budget_exhausted", search->budget_exhausted}};
    } else if (!search_error.empty()) {
        report["search"] = Json{{"error", search_error}};
    }
    res.files.push_back({"degree_report.json", detail::dump(report)});
    res.files.push_back({"fixed_points.csv", fp_csv});
    res.files.push_back({"portrait.svg", portrait_svg(portrait, "Poincare map of " + spec.name)});
    if (!rep.admissible) {
        res.exit_code = kInconclusive;
        res.message = "NotAdmissible: " + rep.reason;
    } else if (!search) {
        res.exit_code = kInconclusive;
        res.message = search_error.empty() ? rep.reason : search_error;
    }
    return res;
}

inline CommandResult cmd_verify(const Json& cfg)
{
    if (!cfg.contains("verify")) {
        throw Error(ErrorCode::InvalidConfig, "verify needs a 'verify' section");
    }
    const auto sel = detail::system_of(cfg);
    const FieldSpec spec = make_builtin(sel);
    const IntegratorConfig ic = detail::integrator_of(cfg);
    const auto& sec = cfg["verify"];
    const std::uint64_t seed = cfg.value("seed", std::uint64_t{1});
    const Json empty = Json::object();
    auto section = [&](const char* k) -> const Json& { return sec.contains(k) ? sec[k] : empty; };

    std::optional<ConditionVerdict> h2_cache;
    auto run_h2 = [&]() -> const ConditionVerdict& {
        if (!h2_cache) {
            H2Options o;
            o.sampling = detail::rho_sampling_of(sec, seed);
            h2_cache = check_H2(spec, o);
        }
        return *h2_cache;
    };

    Json verdicts = Json::array();
    for (const auto& name_j : sec["checks"]) {
        const std::string name = name_j;
        ConditionVerdict v;
        if (name == "star") {
            const auto& s = section("star");
            StarOptions o;
            o.seed = seed;
            o.c_min = s.value("c_min", o.c_min);
            o.c_max = s.value("c_max", o.c_max);
            o.samples = s.value("samples", o.samples);
            v = check_star(spec, o, s.value("T", spec.period));
        } else if (name == "A6") {
            const auto& s = section("A6");
            A6Options o;
            o.seed = seed;
            o.samples_per_annulus = s.value("samples_per_annulus", o.samples_per_annulus);
            const auto radii = s.contains("radii") ? detail::to_list(s["radii"]) : std::vector<double>{1, 2, 4, 8, 16};
            std::vector<double> mesh;
            if (s.contains("time_mesh")) {
                mesh = detail::to_list(s["time_mesh"]);
            } else {
                for (int i = 0; i < 8; ++i) {
                    mesh.push_back(spec.period * i / 8.0);
                }
            }
            v = check_A6(spec, radii, mesh, o);
        } else if (name == "H1") {
            H1Options o;
            o.sampling = detail::rho_sampling_of(sec, seed);
            v = check_H1(spec, o);
        } else if (name == "H2") {
            v = run_h2();
        } else if (name == "growth") {
            const auto& h2 = run_h2();
            if (!h2.holds_at_resolution) {
                v.condition = "growth";
                v.note = "requires an H2 certificate; H2 does not hold at resolution";
            } else {
                const double r = h2.certificate.at("r");
                std::vector<double> radii;
                if (section("growth").contains("radii")) {
                    radii = detail::to_list(section("growth")["radii"]);
                } else {
                    for (double f : {1.0, 2.0, 4.0, 8.0, 16.0}) {
                        radii.push_back(f * std::sqrt(2.0 * r));
                    }
                }
                GrowthOptions o;
                o.seed = seed;
                v = check_growth(spec, h2.certificate.at("k"), radii, o);
            }
        } else if (name == "A4") {
            const auto& s = section("A4");
            std::vector<PlanarPoint> seeds;
            if (s.contains("seeds")) {
                for (const auto& p : s["seeds"]) {
                    seeds.push_back(detail::to_point(p));
                }
            }
            if (sel.name == "example_family" && s.value("special_seed", true)) {
                seeds.insert(seeds.begin(), ExampleFamily(example_params(sel)).special_initial_point());
            }
            A4Options o;
            if (s.contains("escape_radii")) {
                o.escape_radii = detail::to_list(s["escape_radii"]);
            }
            v = check_A4_empirical(spec, seeds, s.value("threshold", 3.0), ic, o);
        } else {
            const auto& s = section("A5");
            A5Options o;
            o.seed = seed;
            o.angles = s.value("angles", o.angles);
            o.targets = s.value("targets", o.targets);
            const auto ladder =
                s.contains("rho_ladder") ? detail::to_list(s["rho_ladder"]) : std::vector<double>{2, 5, 10, 20, 50};
            v = check_A5_empirical(spec, ladder, ic, o);
        }
        verdicts.push_back(detail::verdict_json(v));
    }
    Json out{{"command", "verify"}, {"system", detail::system_json(sel)}, {"seed", seed}, {"verdicts", verdicts}};
    return {{{"verdicts.json", detail::dump(out)}}, kOk, ""};
}

inline CommandResult cmd_sweep(const Json& cfg)
{
    if (!cfg.contains("sweep")) {
        throw Error(ErrorCode::InvalidConfig, "sweep needs a 'sweep' section");
    }
    const auto sel = detail::system_of(cfg);
    if (sel.name != "example_family") {
        throw Error(ErrorCode::InvalidConfig, "sweep runs over the example family; system must be example_family");
    }
    const IntegratorConfig ic = detail::integrator_of(cfg);
    const auto& sec = cfg["sweep"];
    const std::uint64_t seed = cfg.value("seed", std::uint64_t{1});
    const auto alphas = detail::to_list(sec["alpha"]);
    const auto betas = detail::to_list(sec["beta"]);
    const double threshold = sec.value("rot_threshold", 3.0);
    A4Options a4;
    if (sec.contains("escape_radii")) {
        a4.escape_radii = detail::to_list(sec["escape_radii"]);
    }
    H1Options h1;
    h1.sampling = detail::rho_sampling_of(sec, seed);

    // Validate every cell before computing any.
    std::vector<ExampleParams> cells;
    for (double a : alphas) {
        for (double b : betas) {
            SystemSelection s = sel;
            s.params["alpha"] = a;
            s.params["beta"] = b;
            try {
                const ExampleParams p = example_params(s);
                ExampleFamily check(p);
                cells.push_back(p);
            } catch (const Error& e) {
                throw Error(ErrorCode::InvalidConfig, "sweep cell (alpha=" + format_number(a) +
                                                          ", beta=" + format_number(b) + "): " + e.what());
            }
        }
    }
    std::vector<SweepRow> rows;
    for (const auto& p : cells) {
        const FieldSpec spec = make_example_field(p);
        const ExampleFamily fam(p);
        SweepRow r;
        r.alpha = p.alpha;
        r.beta = p.beta;
        r.h1_predicate = h1_predicate(p);
        r.a4_predicate = a4_predicate(p);
        r.h1_empirical = check_H1(spec, h1).holds_at_resolution;
        r.a4_empirical = check_A4_empirical(spec, {fam.special_initial_point()}, threshold, ic, a4).holds_at_resolution;
        r.rot_limit = fam.rot_limit();
        rows.push_back(r);
    }
    return {{{"sweep.csv", sweep_csv(rows)}}, kOk, ""};
}

inline CommandResult cmd_d_delta(const Json& cfg)
{
    if (!cfg.contains("d_delta")) {
        throw Error(ErrorCode::InvalidConfig, "d-delta needs a 'd_delta' section");
    }
    const auto sel = detail::system_of(cfg);
    const FieldSpec spec = make_builtin(sel);
    const IntegratorConfig ic = detail::integrator_of(cfg);
    const auto& sec = cfg["d_delta"];
    CylinderGrid grid;
    grid.n_t = sec.value("n_t", grid.n_t);
    grid.n_boundary = sec.value("n_boundary", grid.n_boundary);
    grid.n_rings = sec.value("n_rings", grid.n_rings);
    Json est = Json::array();
    std::string csv = csv_row({"delta", "x", "y"});
    for (double d : detail::to_list(sec["deltas"])) {
        const DDeltaEstimate e = estimate_D_delta(spec, d, grid, ic);
        est.push_back(Json{{"delta", detail::jnum(d)},
                           {"bounding_radius", detail::jnum(e.bounding_radius)},
                           {"points", e.point_cloud.size()},
                           {"origin_passes", e.origin_passes}});
        for (const auto& p : e.point_cloud) {
            csv += csv_row({format_number(d), format_number(p.x), format_number(p.y)});
        }
    }
    Json out{{"command", "d-delta"},
             {"system", detail::system_json(sel)},
             {"grid", Json{{"n_t", grid.n_t}, {"n_boundary", grid.n_boundary}, {"n_rings", grid.n_rings}}},
             {"estimates", est}};
    return {{{"d_delta.json", detail::dump(out)}, {"d_delta.csv", csv}}, kOk, ""};
}

// ---------------------------------------------------------------------------

inline Json load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::InvalidConfig, "cannot read config file '" + path + "'");
    }
    Json cfg;
    try {
        cfg = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("malformed JSON: ") + e.what());
    }
    validate_config(cfg);
    return cfg;
}

inline std::filesystem::path output_dir(const Json& cfg)
{
    if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') {
        return env;
    }
    return cfg.value("output_dir", std::string("out"));
}

/// Runs one command on a configuration file, writing outputs on success
/// (and for inconclusive find-periodic runs, whose report is the result).
inline int run_command(const std::string& command, const std::string& config_path, std::ostream& err)
{
    try {
        const Json cfg = load_config(config_path);
        CommandResult res;
        if (command == "integrate") {
            res = cmd_integrate(cfg);
        } else if (command == "verify") {
            res = cmd_verify(cfg);
        } else if (command == "find-periodic") {
            res = cmd_find_periodic(cfg);
        } else if (command == "sweep") {
            res = cmd_sweep(cfg);
        } else if (command == "d-delta") {
            res = cmd_d_delta(cfg);
        } else if (command == "profile") {
            res = cmd_profile(cfg);
        } else {
            err << "unknown command '" << command << "'\n";
            return kConfigError;
        }
        const auto dir = output_dir(cfg);
        for (const auto& [name, content] : res.files) {
            atomic_write(dir / name, content);
        }
        if (!res.message.empty()) {
            err << res.message << "\n";
        }
        return res.exit_code;
    } catch (const Error& e) {
        err << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kFailure;
    }
}

inline int main(int argc, char** argv)
{
    CLI::App app{"Rotation numbers, blow-up and periodic orbits of planar time-periodic systems"};
    bool print_schema = false;
    app.add_flag("--print-schema", print_schema, "Print the configuration JSON schema and exit");
    std::string config_path;
    std::string chosen;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"integrate", "Integrate one trajectory (trajectory.csv, summary.json)"},
        {"verify", "Run condition checkers (verdicts.json)"},
        {"find-periodic", "Boundary harness and fixed points of the Poincare map"},
        {"sweep", "Example-family parameter sweep (sweep.csv)"},
        {"d-delta", "Backward-flow estimate of D_delta (d_delta.json, d_delta.csv)"},
        {"profile", "Generalized rotation along a loop (profile.csv)"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("config", config_path, "Configuration file (JSON)")->required();
        sub->callback([&chosen, n = name] { chosen = n; });
    }
    app.require_subcommand(0, 1);
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }
    if (print_schema) {
        std::cout << schema().dump(2) << "\n";
        return kOk;
    }
    if (chosen.empty()) {
        std::cerr << app.help();
        return kConfigError;
    }
    return run_command(chosen, config_path, std::cerr);
}

}  // namespace rotdeg::cli
