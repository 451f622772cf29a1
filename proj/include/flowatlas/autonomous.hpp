#pragma once

// Time-translation invariant families F_{tau rho} = G_{tau - rho} and the
// local one-parameter group G of their maximal flow.

#include <functional>
#include <stdexcept>

#include "flowatlas/core.hpp"
#include "flowatlas/verify.hpp"

namespace flowatlas {

class OneParamGroup
{
public:
    using Map = std::function<Expected<State, DomainViolation>(double alpha, std::span<const double> a)>;
    using DomainQuery = std::function<bool(double alpha, std::span<const double> a)>;

    OneParamGroup(std::size_t n, Map g, DomainQuery domain_query = {});

    std::size_t dimension() const { return n_; }
    Expected<State, DomainViolation> apply(double alpha, std::span<const double> a) const;
    bool in_domain(double alpha, std::span<const double> a) const;

private:
    std::size_t n_;
    Map g_;
    DomainQuery domain_query_;
};

class NotAutonomous : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// max over guarded samples of |F_{tau+c, rho+c}(a) - F_{tau rho}(a)| with
// shifts c taken from the time grid (t1 = tau, t2 = rho).
ConditionReport autonomy_report(const FlowFamily& fam, const SamplePlan& plan, double tol,
                                Execution exec = Execution::parallel);
bool detect_autonomous(const FlowFamily& fam, const SamplePlan& plan, double tol,
                       Execution exec = Execution::parallel);

// G_alpha = F_{alpha 0}. Throws NotAutonomous unless detect_autonomous holds
// on the plan.
OneParamGroup to_group(const FlowFamily& fam, const SamplePlan& plan, double tol);

// The family F_{tau sigma} = G_{tau - sigma}.
FlowFamily family_from_group(const OneParamGroup& g);

// max over guarded (alpha, beta, a) of |G_alpha(G_beta(a)) - G_{alpha+beta}(a)|.
ConditionReport check_group_law(const OneParamGroup& g, const SamplePlan& plan, double tol,
                                Execution exec = Execution::parallel);

} // namespace flowatlas
