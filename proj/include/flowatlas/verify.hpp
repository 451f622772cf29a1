#pragma once

// Sampled checks of the conditions characterising flow families: identity on
// the diagonal, inverse pairs, the guarded cocycle law, domain inclusion,
// interval-shaped existence sets and openness of the domain K.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "flowatlas/core.hpp"
#include "flowatlas/exec.hpp"

namespace flowatlas {

struct SamplePlan
{
    std::vector<double> time_grid;  // sorted
    std::vector<State> state_grid;
    std::size_t random_count = 0;   // extra samples drawn inside the grid bounds
    std::uint64_t seed = 0;

    // time grid {-1, -0.5, 0, 0.5, 1, 1.5}; states: every point of
    // {-1, -0.5, 0, 0.25, 0.5}^n; 200 random samples.
    static SamplePlan default_for(std::size_t n, std::uint64_t seed = 42);

    // Throws std::invalid_argument if the grid is unsorted, empty, or the
    // states disagree in dimension with n.
    void validate(std::size_t n) const;
};

// Deterministic generator behind all random sampling (splitmix64).
class SampleRng
{
public:
    explicit SampleRng(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next();
    double uniform(double lo, double hi); // [lo, hi]

private:
    std::uint64_t state_;
};

struct SamplePoint
{
    std::optional<double> tau, sigma, rho;
    State a;
};

struct ConditionReport
{
    std::string name;
    std::size_t samples_checked = 0;
    std::size_t samples_skipped = 0;
    double max_residual = 0.0;
    std::optional<SamplePoint> worst_case;
    double tolerance = 0.0;
    bool pass = true;
    std::string note;
};

struct Tolerances
{
    double identity = 1e-9;
    double inverse = 1e-9;
    double cocycle = 1e-9;
    double openness_delta = 1e-4;

    // Integrator-backed families carry integration error: 1e-7 there.
    static Tolerances defaults_for(FamilyKind kind);
};

struct VerificationReport
{
    std::vector<ConditionReport> conditions; // identity, inverse, cocycle, domain_inclusion, interval, openness
    bool pass = true;
    std::vector<std::string> notes;

    const ConditionReport& condition(const std::string& name) const;
};

ConditionReport check_identity(const FlowFamily& fam, const SamplePlan& plan, double tol,
                               Execution exec = Execution::parallel);
ConditionReport check_inverse(const FlowFamily& fam, const SamplePlan& plan, double tol,
                              Execution exec = Execution::parallel);
ConditionReport check_cocycle(const FlowFamily& fam, const SamplePlan& plan, double tol,
                              Execution exec = Execution::parallel);
ConditionReport check_domain_inclusion(const FlowFamily& fam, const SamplePlan& plan,
                                       Execution exec = Execution::parallel);
ConditionReport check_interval(const FlowFamily& fam, const SamplePlan& plan, Execution exec = Execution::parallel);
ConditionReport check_openness(const FlowFamily& fam, const SamplePlan& plan, double delta = 1e-4,
                               Execution exec = Execution::parallel);

VerificationReport run_suite(const FlowFamily& fam, const SamplePlan& plan, const Tolerances& tol,
                             Execution exec = Execution::parallel);

// Sample enumerations shared with other modules. Grid samples come first in
// lexicographic order, then `random_count` seeded draws.
struct TimeState
{
    double t;
    State a;
};
struct TwoTimes
{
    double t1, t2;
    State a;
};
struct ThreeTimes
{
    double t1, t2, t3;
    State a;
};

std::vector<TimeState> plan_pairs(const SamplePlan& plan);
std::vector<TwoTimes> plan_triples(const SamplePlan& plan);
std::vector<ThreeTimes> plan_quads(const SamplePlan& plan);

// Per-sample outcome and the deterministic reduction used by every check.
struct SampleOutcome
{
    bool checked = false;
    double residual = 0.0;
};

// Ties keep the lowest sample index; NaN residuals count as infinite.
void reduce_outcomes(const std::vector<SampleOutcome>& outcomes, ConditionReport& report,
                     const std::function<SamplePoint(std::size_t)>& describe);

} // namespace flowatlas
