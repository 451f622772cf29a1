#include <doctest.h>

#include <cmath>

#include "families.hpp"
#include "flowatlas/integrate.hpp"
#include "flowatlas/verify.hpp"

using namespace flowatlas;
using namespace fixtures;

namespace {

SamplePlan single(double tau, double sigma, double a)
{
    SamplePlan p;
    p.time_grid = {std::min(tau, sigma), std::max(tau, sigma)};
    if (tau == sigma)
        p.time_grid = {tau};
    p.state_grid = {{a}};
    return p;
}

FlowFamily numeric_riccati() { return numeric_family(catalog_field(*find_catalog("riccati"))); }

} // namespace

TEST_CASE("default plan")
{
    const auto p = SamplePlan::default_for(2);
    CHECK(p.time_grid.size() == 6);
    CHECK(p.state_grid.size() == 25);
    CHECK(p.random_count == 200);
    CHECK_NOTHROW(p.validate(2));
    CHECK_THROWS_AS(p.validate(1), std::invalid_argument);
    SamplePlan bad = p;
    bad.time_grid = {1.0, 0.0};
    CHECK_THROWS_AS(bad.validate(2), std::invalid_argument);
}

TEST_CASE("sample generator is reproducible")
{
    SampleRng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
        const double x = a.uniform(-1.0, 2.0);
        CHECK(x == b.uniform(-1.0, 2.0));
        CHECK(x >= -1.0);
        CHECK(x <= 2.0);
    }
    CHECK(a.next() != c.next());
}

TEST_CASE("identity on the diagonal")
{
    const auto plan = SamplePlan::default_for(1);
    auto r = check_identity(riccati_closed(), plan, 1e-12);
    CHECK(r.pass);
    CHECK(r.max_residual == 0.0);

    auto num = check_identity(numeric_riccati(), plan, 1e-10);
    CHECK(num.pass);

    auto broken = check_identity(broken_identity(), plan, 1e-9);
    CHECK_FALSE(broken.pass);
    CHECK(std::abs(broken.max_residual - 0.1) <= 1e-12);
    REQUIRE(broken.worst_case.has_value());
}

TEST_CASE("inverse pairs")
{
    const auto fam = riccati_closed();
    const double a[] = {0.5};
    auto there = fam.evaluate(1.0, 0.0, a);
    REQUIRE(there.has_value());
    CHECK(there->at(0) == 1.0);
    CHECK(fam.evaluate(0.0, 1.0, *there)->at(0) == 0.5);

    const auto plan = SamplePlan::default_for(1);
    CHECK(check_inverse(fam, plan, 1e-9).pass);
    CHECK(check_inverse(numeric_riccati(), plan, 1e-7).pass);
    auto constant = check_inverse(constant_maps(), plan, 1e-9);
    CHECK_FALSE(constant.pass);
    CHECK(constant.max_residual >= 0.5);
}

TEST_CASE("cocycle")
{
    const auto fam = riccati_closed();
    const double a[] = {0.5};
    CHECK(fam.evaluate(1.0, 0.0, a)->at(0) == 1.0);
    const double one[] = {1.0};
    CHECK(fam.evaluate(1.5, 1.0, one)->at(0) == 2.0);
    CHECK(fam.evaluate(1.5, 0.0, a)->at(0) == 2.0);

    SamplePlan p;
    p.time_grid = {0.0, 1.0, 1.5};
    p.state_grid = {{0.5}};
    auto r = check_cocycle(fam, p, 1e-12);
    CHECK(r.pass);
    CHECK(r.max_residual <= 1e-15);

    // tau = sigma = rho only: identity residual
    auto diag = check_cocycle(fam, single(0.3, 0.3, 0.2), 1e-12);
    CHECK(diag.max_residual == 0.0);

    auto perturbed = check_cocycle(perturbed_cocycle(), SamplePlan::default_for(1), 1e-9);
    CHECK_FALSE(perturbed.pass);
    CHECK(perturbed.max_residual >= 0.01 * 0.25);
    REQUIRE(perturbed.worst_case.has_value());
    CHECK(perturbed.worst_case->tau.has_value());
    CHECK(perturbed.worst_case->rho.has_value());
}

TEST_CASE("domain inclusion")
{
    const auto plan = SamplePlan::default_for(1);
    auto ok = check_domain_inclusion(riccati_closed(), plan);
    CHECK(ok.pass);
    CHECK(ok.max_residual == 0.0);

    auto shrunk = check_domain_inclusion(shrunk_diagonal(), plan);
    CHECK_FALSE(shrunk.pass);
    CHECK(shrunk.max_residual >= 1.0);
}

TEST_CASE("existence sets are intervals")
{
    SamplePlan p;
    for (double t = -1.0; t <= 3.0 + 1e-12; t += 0.25)
        p.time_grid.push_back(t);
    p.state_grid = {{0.5}, {0.0}};
    const auto fam = riccati_closed();
    for (double tau : p.time_grid) {
        const double a[] = {0.5};
        CHECK(fam.in_domain(tau, 0.0, a) == (tau < 2.0));
    }
    CHECK(check_interval(fam, p).pass);

    auto gap = check_interval(gapped_domain(), p);
    CHECK_FALSE(gap.pass);
    CHECK(gap.max_residual >= 1.0);
}

TEST_CASE("openness of K")
{
    const auto fam = riccati_closed();
    auto inner = check_openness(fam, single(1.0, 0.0, 0.5), 1e-4);
    CHECK(inner.pass);
    CHECK(inner.samples_checked >= 1);

    // within delta of the boundary tau * a = 1
    SamplePlan near_pair;
    near_pair.time_grid = {0.0, 1.99995};
    near_pair.state_grid = {{0.5}};
    auto skipped = check_openness(fam, near_pair, 1e-4);
    CHECK(skipped.pass);
    CHECK(skipped.samples_skipped >= 1);

    auto empty = check_openness(empty_family(1), SamplePlan::default_for(1), 1e-4);
    CHECK_FALSE(empty.pass);
    CHECK(empty.note == "K empty over plan");

    // A closed half-space {tau >= sigma} has its boundary through the diagonal.
    const auto base = riccati_closed();
    FlowFamily closed(
        1, FamilyKind::closed_form,
        [base](double tau, double sigma, std::span<const double> a) -> Expected<State, DomainViolation> {
            if (tau < sigma)
                return DomainViolation{};
            return base.evaluate(tau, sigma, a);
        });
    auto bad = check_openness(closed, SamplePlan::default_for(1), 1e-4);
    CHECK_FALSE(bad.pass);
}

TEST_CASE("full suite")
{
    const auto plan = SamplePlan::default_for(1);
    auto closed = run_suite(riccati_closed(), plan, Tolerances{});
    CHECK(closed.pass);
    CHECK(closed.conditions.size() == 6);
    CHECK(closed.notes.front() == "surjectivity not sampled");

    auto num = run_suite(numeric_riccati(), plan, Tolerances::defaults_for(FamilyKind::numeric));
    CHECK(num.pass);

    auto perturbed = run_suite(perturbed_cocycle(), plan, Tolerances{});
    CHECK_FALSE(perturbed.pass);
    CHECK_FALSE(perturbed.condition("cocycle").pass);
    CHECK(perturbed.condition("identity").pass);

    auto broken = run_suite(broken_identity(), plan, Tolerances{});
    CHECK_FALSE(broken.condition("identity").pass);

    auto constant = run_suite(constant_maps(), plan, Tolerances{});
    CHECK_FALSE(constant.condition("inverse").pass);
}

TEST_CASE("catalog families pass at defaults")
{
    for (const auto& entry : catalog()) {
        const auto plan = SamplePlan::default_for(entry.n);
        const auto fam = catalog_family(entry);
        auto r = run_suite(fam, plan, Tolerances::defaults_for(fam.kind()));
        CHECK_MESSAGE(r.pass, entry.name);
        const auto num = numeric_family(catalog_field(entry));
        auto rn = run_suite(num, plan, Tolerances::defaults_for(num.kind()));
        CHECK_MESSAGE(rn.pass, entry.name);
    }
}

TEST_CASE("tolerance defaults by kind")
{
    CHECK(Tolerances::defaults_for(FamilyKind::closed_form).cocycle == 1e-9);
    CHECK(Tolerances::defaults_for(FamilyKind::numeric).cocycle == 1e-7);
}

TEST_CASE("worst case ties keep the first sample")
{
    std::vector<SampleOutcome> outcomes{{false, 0.0}, {true, 2.0}, {true, 2.0}, {true, NAN}};
    ConditionReport r;
    r.tolerance = 1.0;
    std::vector<std::size_t> seen;
    reduce_outcomes(outcomes, r, [&](std::size_t i) {
        seen.push_back(i);
        return SamplePoint{static_cast<double>(i), std::nullopt, std::nullopt, {}};
    });
    CHECK(std::isinf(r.max_residual));
    REQUIRE(r.worst_case.has_value());
    CHECK(*r.worst_case->tau == 3.0);
    CHECK(r.samples_checked == 3);
    CHECK(r.samples_skipped == 1);
}
