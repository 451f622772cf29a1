#include "flowatlas/verify.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flowatlas {

namespace {

struct Bounds
{
    double t_lo, t_hi;
    State a_lo, a_hi;
};

Bounds plan_bounds(const SamplePlan& plan)
{
    if (plan.time_grid.empty() || plan.state_grid.empty())
        throw std::invalid_argument("SamplePlan: time and state grids must be nonempty");
    Bounds b{plan.time_grid.front(), plan.time_grid.back(), plan.state_grid.front(), plan.state_grid.front()};
    for (const auto& s : plan.state_grid)
        for (std::size_t i = 0; i < s.size(); ++i) {
            b.a_lo[i] = std::min(b.a_lo[i], s[i]);
            b.a_hi[i] = std::max(b.a_hi[i], s[i]);
        }
    return b;
}

State random_state(SampleRng& rng, const Bounds& b)
{
    State a(b.a_lo.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        a[i] = rng.uniform(b.a_lo[i], b.a_hi[i]);
    return a;
}

void finish(ConditionReport& r)
{
    r.pass = r.max_residual <= r.tolerance;
}

SamplePoint point_of(const TimeState& s) { return {std::nullopt, s.t, std::nullopt, s.a}; }

// Counts (tau, sigma, rho, a) slots for the worst-case record.
SamplePoint point3(std::optional<double> tau, std::optional<double> sigma, std::optional<double> rho, const State& a)
{
    return {tau, sigma, rho, a};
}

} // namespace

std::uint64_t SampleRng::next()
{
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double SampleRng::uniform(double lo, double hi)
{
    const double u = static_cast<double>(next() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

SamplePlan SamplePlan::default_for(std::size_t n, std::uint64_t seed)
{
    SamplePlan plan;
    plan.time_grid = {-1.0, -0.5, 0.0, 0.5, 1.0, 1.5};
    const std::vector<double> values{-1.0, -0.5, 0.0, 0.25, 0.5};
    std::vector<std::size_t> idx(n, 0);
    while (true) {
        State s(n);
        for (std::size_t i = 0; i < n; ++i)
            s[i] = values[idx[i]];
        plan.state_grid.push_back(std::move(s));
        std::size_t k = 0;
        while (k < n && ++idx[k] == values.size())
            idx[k++] = 0;
        if (k == n)
            break;
    }
    plan.random_count = 200;
    plan.seed = seed;
    return plan;
}

void SamplePlan::validate(std::size_t n) const
{
    if (time_grid.empty() || state_grid.empty())
        throw std::invalid_argument("SamplePlan: time and state grids must be nonempty");
    if (!std::is_sorted(time_grid.begin(), time_grid.end()))
        throw std::invalid_argument("SamplePlan: time grid must be sorted");
    for (const auto& s : state_grid)
        if (s.size() != n)
            throw std::invalid_argument("SamplePlan: state of dimension " + std::to_string(s.size()) + ", expected "
                                        + std::to_string(n));
    if (!all_finite(time_grid))
        throw std::invalid_argument("SamplePlan: non-finite time");
}

Tolerances Tolerances::defaults_for(FamilyKind kind)
{
    Tolerances t;
    if (kind == FamilyKind::numeric)
        t.identity = t.inverse = t.cocycle = 1e-7;
    return t;
}

const ConditionReport& VerificationReport::condition(const std::string& name) const
{
    for (const auto& c : conditions)
        if (c.name == name)
            return c;
    throw std::out_of_range("VerificationReport: no condition " + name);
}

std::vector<TimeState> plan_pairs(const SamplePlan& plan)
{
    const Bounds b = plan_bounds(plan);
    std::vector<TimeState> out;
    for (double t : plan.time_grid)
        for (const auto& a : plan.state_grid)
            out.push_back({t, a});
    SampleRng rng(plan.seed);
    for (std::size_t i = 0; i < plan.random_count; ++i) {
        const double t = rng.uniform(b.t_lo, b.t_hi);
        out.push_back({t, random_state(rng, b)});
    }
    return out;
}

std::vector<TwoTimes> plan_triples(const SamplePlan& plan)
{
    const Bounds b = plan_bounds(plan);
    std::vector<TwoTimes> out;
    for (double t1 : plan.time_grid)
        for (double t2 : plan.time_grid)
            for (const auto& a : plan.state_grid)
                out.push_back({t1, t2, a});
    SampleRng rng(plan.seed);
    for (std::size_t i = 0; i < plan.random_count; ++i) {
        const double t1 = rng.uniform(b.t_lo, b.t_hi);
        const double t2 = rng.uniform(b.t_lo, b.t_hi);
        out.push_back({t1, t2, random_state(rng, b)});
    }
    return out;
}

std::vector<ThreeTimes> plan_quads(const SamplePlan& plan)
{
    const Bounds b = plan_bounds(plan);
    std::vector<ThreeTimes> out;
    for (double t1 : plan.time_grid)
        for (double t2 : plan.time_grid)
            for (double t3 : plan.time_grid)
                for (const auto& a : plan.state_grid)
                    out.push_back({t1, t2, t3, a});
    SampleRng rng(plan.seed);
    for (std::size_t i = 0; i < plan.random_count; ++i) {
        const double t1 = rng.uniform(b.t_lo, b.t_hi);
        const double t2 = rng.uniform(b.t_lo, b.t_hi);
        const double t3 = rng.uniform(b.t_lo, b.t_hi);
        out.push_back({t1, t2, t3, random_state(rng, b)});
    }
    return out;
}

void reduce_outcomes(const std::vector<SampleOutcome>& outcomes, ConditionReport& report,
                     const std::function<SamplePoint(std::size_t)>& describe)
{
    std::optional<std::size_t> worst;
    double max_res = 0.0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const auto& o = outcomes[i];
        if (!o.checked) {
            ++report.samples_skipped;
            continue;
        }
        ++report.samples_checked;
        const double r = std::isnan(o.residual) ? kInf : o.residual;
        if (!worst || r > max_res) {
            max_res = r;
            worst = i;
        }
    }
    report.max_residual = max_res;
    if (worst)
        report.worst_case = describe(*worst);
}

ConditionReport check_identity(const FlowFamily& fam, const SamplePlan& plan, double tol, Execution exec)
{
    plan.validate(fam.dimension());
    ConditionReport report{"identity"};
    report.tolerance = tol;
    const auto samples = plan_pairs(plan);
    const auto outcomes = map_indices<SampleOutcome>(exec, samples.size(), [&](std::size_t i) {
        const auto& s = samples[i];
        const auto v = fam.evaluate(s.t, s.t, s.a);
        if (!v)
            return SampleOutcome{};
        return SampleOutcome{true, max_abs_diff(*v, s.a)};
    });
    reduce_outcomes(outcomes, report, [&](std::size_t i) { return point_of(samples[i]); });
    finish(report);
    return report;
}

ConditionReport check_inverse(const FlowFamily& fam, const SamplePlan& plan, double tol, Execution exec)
{
    plan.validate(fam.dimension());
    ConditionReport report{"inverse"};
    report.tolerance = tol;
    // t1 = rho, t2 = sigma
    const auto samples = plan_triples(plan);
    const auto outcomes = map_indices<SampleOutcome>(exec, samples.size(), [&](std::size_t i) {
        const auto& s = samples[i];
        const auto there = fam.evaluate(s.t2, s.t1, s.a);
        if (!there)
            return SampleOutcome{};
        const auto back = fam.evaluate(s.t1, s.t2, *there);
        if (!back)
            return SampleOutcome{};
        return SampleOutcome{true, max_abs_diff(*back, s.a)};
    });
    reduce_outcomes(outcomes, report,
                    [&](std::size_t i) { return point3(std::nullopt, samples[i].t2, samples[i].t1, samples[i].a); });
    finish(report);
    return report;
}

ConditionReport check_cocycle(const FlowFamily& fam, const SamplePlan& plan, double tol, Execution exec)
{
    plan.validate(fam.dimension());
    ConditionReport report{"cocycle"};
    report.tolerance = tol;
    // t1 = tau, t2 = sigma, t3 = rho. Guard: a in Dom F_{sigma rho} and
    // F_{sigma rho}(a) in Dom F_{tau sigma}; an undefined F_{tau rho}(a) past
    // the guard is itself a violation.
    const auto samples = plan_quads(plan);
    const auto outcomes = map_indices<SampleOutcome>(exec, samples.size(), [&](std::size_t i) {
        const auto& s = samples[i];
        const auto inner = fam.evaluate(s.t2, s.t3, s.a);
        if (!inner)
            return SampleOutcome{};
        const auto composed = fam.evaluate(s.t1, s.t2, *inner);
        if (!composed)
            return SampleOutcome{};
        const auto direct = fam.evaluate(s.t1, s.t3, s.a);
        if (!direct)
            return SampleOutcome{true, kInf};
        return SampleOutcome{true, max_abs_diff(*composed, *direct)};
    });
    reduce_outcomes(outcomes, report,
                    [&](std::size_t i) { return point3(samples[i].t1, samples[i].t2, samples[i].t3, samples[i].a); });
    finish(report);
    return report;
}

ConditionReport check_domain_inclusion(const FlowFamily& fam, const SamplePlan& plan, Execution exec)
{
    plan.validate(fam.dimension());
    ConditionReport report{"domain_inclusion"};
    report.tolerance = 0.0;
    // t1 = rho, t2 = sigma: Dom F_{rho sigma} must lie inside Dom F_{sigma sigma}.
    const auto samples = plan_triples(plan);
    const auto outcomes = map_indices<SampleOutcome>(exec, samples.size(), [&](std::size_t i) {
        const auto& s = samples[i];
        if (!fam.in_domain(s.t1, s.t2, s.a))
            return SampleOutcome{};
        return SampleOutcome{true, fam.in_domain(s.t2, s.t2, s.a) ? 0.0 : 1.0};
    });
    reduce_outcomes(outcomes, report,
                    [&](std::size_t i) { return point3(std::nullopt, samples[i].t2, samples[i].t1, samples[i].a); });
    report.max_residual = 0.0;
    for (const auto& o : outcomes)
        if (o.checked)
            report.max_residual += o.residual;
    finish(report);
    return report;
}

ConditionReport check_interval(const FlowFamily& fam, const SamplePlan& plan, Execution exec)
{
    plan.validate(fam.dimension());
    ConditionReport report{"interval"};
    report.tolerance = 0.0;
    const auto samples = plan_pairs(plan); // t = rho
    const auto outcomes = map_indices<SampleOutcome>(exec, samples.size(), [&](std::size_t i) {
        const auto& s = samples[i];
        // Pattern over the sorted grid must be out* in* out*.
        int phase = 0; // 0: before, 1: inside, 2: after
        bool any = false;
        for (double tau : plan.time_grid) {
            const bool in = fam.in_domain(tau, s.t, s.a);
            any = any || in;
            if (in && phase == 0)
                phase = 1;
            else if (!in && phase == 1)
                phase = 2;
            else if (in && phase == 2)
                return SampleOutcome{true, 1.0};
        }
        if (!any)
            return SampleOutcome{};
        return SampleOutcome{true, 0.0};
    });
    reduce_outcomes(outcomes, report, [&](std::size_t i) { return point3(std::nullopt, std::nullopt, samples[i].t, samples[i].a); });
    report.max_residual = 0.0;
    for (const auto& o : outcomes)
        if (o.checked)
            report.max_residual += o.residual;
    finish(report);
    return report;
}

ConditionReport check_openness(const FlowFamily& fam, const SamplePlan& plan, double delta, Execution exec)
{
    if (!(delta > 0.0))
        throw std::invalid_argument("check_openness: delta must be positive");
    plan.validate(fam.dimension());
    ConditionReport report{"openness"};
    report.tolerance = 0.0;
    const std::size_t n = fam.dimension();
    const auto samples = plan_triples(plan); // t1 = tau, t2 = sigma

    // Outcome encoding: unchecked = not in K; checked with residual -1 =
    // in K but within delta of the boundary (skipped); otherwise residual is
    // the violation count.
    const auto outcomes = map_indices<SampleOutcome>(exec, samples.size(), [&](std::size_t i) {
        const auto& s = samples[i];
        if (!fam.in_domain(s.t1, s.t2, s.a))
            return SampleOutcome{};
        std::vector<double> z(n + 2);
        z[0] = s.t1;
        z[1] = s.t2;
        std::copy(s.a.begin(), s.a.end(), z.begin() + 2);
        auto member = [&](std::size_t axis, double offset) {
            std::vector<double> p = z;
            p[axis] += offset;
            return fam.in_domain(p[0], p[1], std::span<const double>(p).subspan(2));
        };
        bool near_boundary = false;
        for (std::size_t axis = 0; axis < n + 2; ++axis)
            for (double sign : {-1.0, 1.0}) {
                if (member(axis, sign * delta))
                    continue;
                // Locate the boundary along this ray; a boundary through the
                // sample itself means K is not open there.
                double in = 0.0, out = delta;
                for (int k = 0; k < 40; ++k) {
                    const double mid = 0.5 * (in + out);
                    if (member(axis, sign * mid))
                        in = mid;
                    else
                        out = mid;
                }
                if (out < delta * 1e-9)
                    return SampleOutcome{true, 1.0};
                near_boundary = true;
            }
        if (near_boundary)
            return SampleOutcome{true, -1.0};
        for (std::size_t axis = 0; axis < n + 2; ++axis)
            for (double sign : {-1.0, 1.0})
                if (!member(axis, sign * 0.5 * delta))
                    return SampleOutcome{true, 1.0};
        return SampleOutcome{true, 0.0};
    });

    std::size_t in_k = 0;
    double violations = 0.0;
    std::optional<std::size_t> worst;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const auto& o = outcomes[i];
        if (!o.checked)
            continue;
        ++in_k;
        if (o.residual < 0.0) {
            ++report.samples_skipped;
            continue;
        }
        ++report.samples_checked;
        if (o.residual > 0.0) {
            violations += o.residual;
            if (!worst)
                worst = i;
        }
    }
    report.samples_skipped += outcomes.size() - in_k;
    report.max_residual = violations;
    if (worst)
        report.worst_case = point3(samples[*worst].t1, samples[*worst].t2, std::nullopt, samples[*worst].a);
    finish(report);
    if (in_k == 0) {
        report.pass = false;
        report.note = "K empty over plan";
    }
    return report;
}

VerificationReport run_suite(const FlowFamily& fam, const SamplePlan& plan, const Tolerances& tol, Execution exec)
{
    VerificationReport r;
    r.conditions.push_back(check_identity(fam, plan, tol.identity, exec));
    r.conditions.push_back(check_inverse(fam, plan, tol.inverse, exec));
    r.conditions.push_back(check_cocycle(fam, plan, tol.cocycle, exec));
    r.conditions.push_back(check_domain_inclusion(fam, plan, exec));
    r.conditions.push_back(check_interval(fam, plan, exec));
    r.conditions.push_back(check_openness(fam, plan, tol.openness_delta, exec));
    r.pass = std::all_of(r.conditions.begin(), r.conditions.end(), [](const auto& c) { return c.pass; });
    // Bijectivity is certified through the inverse check (injectivity);
    // surjectivity onto a codomain needs an analytic codomain description.
    r.notes.push_back("surjectivity not sampled");
    return r;
}

} // namespace flowatlas
