#include "flowatlas/autonomous.hpp"

#include <stdexcept>

namespace flowatlas {

OneParamGroup::OneParamGroup(std::size_t n, Map g, DomainQuery domain_query)
    : n_(n), g_(std::move(g)), domain_query_(std::move(domain_query))
{
    if (n_ == 0 || !g_)
        throw std::invalid_argument("OneParamGroup: need a dimension and a map");
}

Expected<State, DomainViolation> OneParamGroup::apply(double alpha, std::span<const double> a) const
{
    if (a.size() != n_)
        return DomainViolation{ViolationKind::dimension_mismatch};
    if (domain_query_ && !domain_query_(alpha, a))
        return DomainViolation{};
    auto r = g_(alpha, a);
    if (r && !all_finite(*r))
        return DomainViolation{};
    return r;
}

bool OneParamGroup::in_domain(double alpha, std::span<const double> a) const
{
    if (a.size() != n_)
        return false;
    if (domain_query_)
        return domain_query_(alpha, a);
    return apply(alpha, a).has_value();
}

ConditionReport autonomy_report(const FlowFamily& fam, const SamplePlan& plan, double tol, Execution exec)
{
    plan.validate(fam.dimension());
    ConditionReport report{"autonomy"};
    report.tolerance = tol;
    const auto base = plan_triples(plan);
    const auto& shifts = plan.time_grid;
    const std::size_t m = shifts.size();
    const auto outcomes = map_indices<SampleOutcome>(exec, base.size() * m, [&](std::size_t i) {
        const auto& s = base[i / m];
        const double c = shifts[i % m];
        const auto plain = fam.evaluate(s.t1, s.t2, s.a);
        if (!plain)
            return SampleOutcome{};
        const auto moved = fam.evaluate(s.t1 + c, s.t2 + c, s.a);
        if (!moved)
            return SampleOutcome{};
        return SampleOutcome{true, max_abs_diff(*moved, *plain)};
    });
    reduce_outcomes(outcomes, report, [&](std::size_t i) {
        const auto& s = base[i / m];
        return SamplePoint{s.t1, std::nullopt, s.t2, s.a};
    });
    report.pass = report.max_residual <= tol && report.samples_checked > 0;
    return report;
}

bool detect_autonomous(const FlowFamily& fam, const SamplePlan& plan, double tol, Execution exec)
{
    return autonomy_report(fam, plan, tol, exec).pass;
}

OneParamGroup to_group(const FlowFamily& fam, const SamplePlan& plan, double tol)
{
    const auto report = autonomy_report(fam, plan, tol);
    if (!report.pass)
        throw NotAutonomous("family is not time-translation invariant (residual "
                            + std::to_string(report.max_residual) + ")");
    return OneParamGroup(
        fam.dimension(), [fam](double alpha, std::span<const double> a) { return fam.evaluate(alpha, 0.0, a); },
        [fam](double alpha, std::span<const double> a) { return fam.in_domain(alpha, 0.0, a); });
}

FlowFamily family_from_group(const OneParamGroup& g)
{
    return FlowFamily(
        g.dimension(), FamilyKind::group_backed,
        [g](double tau, double sigma, std::span<const double> a) -> Expected<State, DomainViolation> {
            if (tau == sigma && g.in_domain(0.0, a))
                return State(a.begin(), a.end());
            return g.apply(tau - sigma, a);
        },
        [g](double tau, double sigma, std::span<const double> a) { return g.in_domain(tau - sigma, a); });
}

ConditionReport check_group_law(const OneParamGroup& g, const SamplePlan& plan, double tol, Execution exec)
{
    plan.validate(g.dimension());
    ConditionReport report{"group_law"};
    report.tolerance = tol;
    const auto samples = plan_triples(plan); // t1 = alpha, t2 = beta
    const auto outcomes = map_indices<SampleOutcome>(exec, samples.size(), [&](std::size_t i) {
        const auto& s = samples[i];
        const auto inner = g.apply(s.t2, s.a);
        if (!inner)
            return SampleOutcome{};
        const auto composed = g.apply(s.t1, *inner);
        if (!composed)
            return SampleOutcome{};
        const auto direct = g.apply(s.t1 + s.t2, s.a);
        if (!direct)
            return SampleOutcome{true, kInf};
        return SampleOutcome{true, max_abs_diff(*composed, *direct)};
    });
    reduce_outcomes(outcomes, report, [&](std::size_t i) {
        const auto& s = samples[i];
        return SamplePoint{s.t1, s.t2, std::nullopt, s.a};
    });
    report.pass = report.max_residual <= tol;
    return report;
}

} // namespace flowatlas
