#pragma once

// JSON run configuration.
//
//   {
//     "system":      {"catalog": name}
//                  | {"field":  {"n": int, "rhs": [expr...],
//                                "domain": {"time": [lo, hi], "predicate": expr}}}
//                  | {"family": {"n": int, "components": [expr...],
//                                "domain_predicate": expr}},
//     "integrator":  {"rel_tol", "abs_tol", "h_init", "h_min", "blowup_radius",
//                     "blowup_time_scale", "window": [lo, hi], "max_steps"},
//     "plan":        {"time_grid": [...], "state_grid": [[...]...],
//                     "random_count": int, "seed": int},
//     "tolerances":  {"identity", "inverse", "cocycle", "openness_delta",
//                     "autonomy", "group_law", "reference_field", "roundtrip",
//                     "wronski", "smoothing"},
//     "reconstruct": {"h", "richardson", "grid": {"time": [lo, hi, points],
//                     "box": [[lo, hi]...], "points": int}, "roundtrip": bool},
//     "decompose":   {"tau0", "grid": [...] | {"start", "stop", "step"}},
//     "mollify":     {"epsilon", "panels", "alphas": [...]}
//   }

#include <optional>
#include <stdexcept>
#include <string>

#include "flowatlas/core.hpp"
#include "flowatlas/integrate.hpp"
#include "flowatlas/reconstruct.hpp"
#include "flowatlas/verify.hpp"

namespace flowatlas {

class ConfigError : public std::runtime_error
{
public:
    ConfigError(std::string path, std::string field, std::string message);

    const std::string& path() const { return path_; }
    const std::string& field() const { return field_; }
    const std::string& message() const { return message_; }

private:
    std::string path_, field_, message_;
};

struct CommandTolerances
{
    std::optional<double> identity, inverse, cocycle, openness_delta;
    double autonomy = 1e-9;
    double group_law = 1e-9;
    double reference_field = 1e-6;
    double roundtrip = 1e-5;
    double wronski = 1e-3;
    double smoothing = 1e-8;

    // Kind-dependent defaults with any configured overrides applied.
    Tolerances suite_for(FamilyKind kind) const;
};

struct RunSpec
{
    std::string source; // "catalog:<name>", "field" or "family"
    std::size_t n = 1;
    std::optional<VectorField> field;
    std::optional<FlowFamily> family;
    IntegratorConfig integrator;
    SamplePlan plan;
    CommandTolerances tolerances;

    // reconstruct
    double fd_step = 1e-4;
    bool richardson = true;
    std::optional<TabulationGrid> tabulation;
    bool roundtrip = false;
    // decompose
    double tau0 = 0.0;
    std::vector<double> decompose_grid;
    // mollify
    double epsilon = 0.25;
    std::size_t panels = 256;
    std::vector<double> alphas;
};

// `origin` names the source in error messages.
RunSpec parse_config(const std::string& text, const std::string& origin = "<config>");
RunSpec load_config(const std::string& path);

} // namespace flowatlas
