#include <doctest.h>

#include <cmath>

#include "flowatlas/catalog.hpp"
#include "flowatlas/integrate.hpp"

using namespace flowatlas;

namespace {

VectorField riccati_field() { return catalog_field(*find_catalog("riccati")); }
VectorField affine_field() { return catalog_field(*find_catalog("affine_scalar")); }

State st(std::initializer_list<double> v) { return State(v); }

double riccati_exact(double tau, double sigma, double a) { return a / (1.0 + (sigma - tau) * a); }

} // namespace

TEST_CASE("advance on the riccati field")
{
    const auto f = riccati_field();
    auto one = advance(f, 0.0, st({0.5}), 1.0);
    REQUIRE(one.has_value());
    CHECK(std::abs(one->at(0) - 1.0) <= 1e-8);

    auto same = advance(f, 0.0, st({0.5}), 0.0);
    REQUIRE(same.has_value());
    CHECK(same->at(0) == 0.5);

    auto esc = advance(f, 0.0, st({0.5}), 3.0);
    REQUIRE_FALSE(esc.has_value());
    CHECK(esc.error().kind == EscapeKind::blow_up);
    CHECK(std::abs(esc.error().time - 2.0) <= 1e-3);

    // backward in time the solution decays towards 0
    auto back = advance(f, 0.0, st({0.5}), -3.0);
    REQUIRE(back.has_value());
    CHECK(std::abs(back->at(0) - riccati_exact(-3.0, 0.0, 0.5)) <= 1e-8);

    // negative data escape backward
    auto neg = advance(f, 0.0, st({-1.0}), -2.0);
    REQUIRE_FALSE(neg.has_value());
    CHECK(neg.error().kind == EscapeKind::blow_up);
    CHECK(std::abs(neg.error().time + 1.0) <= 1e-3);
}

TEST_CASE("numeric families")
{
    const auto fam = numeric_family(riccati_field());
    CHECK(fam.kind() == FamilyKind::numeric);
    CHECK(std::abs(fam.evaluate(1.0, 0.0, st({0.5}))->at(0) - 1.0) <= 1e-8);
    for (double s : {-1.0, 0.3, 1.5})
        CHECK(std::abs(fam.evaluate(s, s, st({0.25}))->at(0) - 0.25) <= 1e-12);
    auto esc = fam.evaluate(3.0, 0.0, st({0.5}));
    REQUIRE_FALSE(esc.has_value());
    CHECK(esc.error().kind == ViolationKind::out_of_domain);
    REQUIRE(esc.error().escape.has_value());
    CHECK(*esc.error().escape == EscapeKind::blow_up);
    CHECK_FALSE(fam.in_domain(3.0, 0.0, st({0.5})));

    const auto lin = numeric_family(affine_field());
    CHECK(std::abs(lin.evaluate(std::log(2.0), 0.0, st({0.0}))->at(0) - 1.0) <= 1e-8);
}

TEST_CASE("escape intervals")
{
    const auto f = riccati_field();
    const auto j = escape_interval(f, 0.0, st({0.5}));
    CHECK(j.lower == -50.0);
    CHECK(j.lower_kind == EndpointKind::window_limit);
    CHECK(std::abs(j.upper - 2.0) <= 1e-3);
    CHECK(j.upper_kind == EndpointKind::blow_up);

    const auto fixed = escape_interval(f, 0.0, st({0.0}));
    CHECK(fixed.lower == -50.0);
    CHECK(fixed.upper == 50.0);
    CHECK(fixed.lower_kind == EndpointKind::window_limit);
    CHECK(fixed.upper_kind == EndpointKind::window_limit);

    const auto lin = escape_interval(affine_field(), 0.0, st({1.0}));
    CHECK(lin.lower == -50.0);
    CHECK(lin.upper == 50.0);
    CHECK(lin.lower_kind == EndpointKind::window_limit);
    CHECK(lin.upper_kind == EndpointKind::window_limit);
}

TEST_CASE("leaving the domain of the field")
{
    DomainSpec d;
    d.n = 1;
    d.predicate = expr::parse("2 - x1").value(); // x1 < 2
    const auto f = VectorField::from_expressions(d, {expr::parse("1").value()});
    auto r = advance(f, 0.0, st({0.0}), 5.0);
    REQUIRE_FALSE(r.has_value());
    CHECK(r.error().kind == EscapeKind::left_domain);
    CHECK(std::abs(r.error().time - 2.0) <= 1e-6);

    const auto j = escape_interval(f, 0.0, st({0.0}));
    CHECK(j.upper_kind == EndpointKind::left_domain);
    CHECK(std::abs(j.upper - 2.0) <= 1e-6);
    CHECK(j.lower_kind == EndpointKind::window_limit);

    auto start_outside = advance(f, 0.0, st({3.0}), 1.0);
    REQUIRE_FALSE(start_outside.has_value());
    CHECK(start_outside.error().kind == EscapeKind::left_domain);

    DomainSpec boxed;
    boxed.n = 1;
    boxed.time_box = {-1.0, 1.0};
    const auto g = VectorField::from_expressions(boxed, {expr::parse("0").value()});
    auto past = advance(g, 0.0, st({1.0}), 3.0);
    REQUIRE_FALSE(past.has_value());
    CHECK(past.error().kind == EscapeKind::left_domain);
    CHECK(past.error().time == doctest::Approx(1.0));
}

TEST_CASE("window edges")
{
    IntegratorConfig cfg;
    cfg.window_lo = -1.0;
    cfg.window_hi = 1.0;
    auto r = advance(affine_field(), 0.0, st({0.0}), 2.0, cfg);
    REQUIRE_FALSE(r.has_value());
    CHECK(r.error().kind == EscapeKind::window_limit);
    CHECK(r.error().time == 1.0);
    auto inside = advance(affine_field(), 0.0, st({0.0}), 1.0, cfg);
    CHECK(inside.has_value());
}

TEST_CASE("config validation")
{
    IntegratorConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.h_min = 1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.rel_tol = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.window_lo = 1.0;
    cfg.window_hi = 1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("oracle agreement on the grid")
{
    const auto f = riccati_field();
    double worst = 0.0;
    for (double tau : {-1.0, -0.5, 0.0, 0.5, 1.0, 1.5})
        for (double sigma : {-1.0, -0.5, 0.0, 0.5, 1.0, 1.5})
            for (double a : {-1.0, -0.5, 0.0, 0.25, 0.5}) {
                if ((tau - sigma) * a >= 0.9)
                    continue;
                auto v = advance(f, sigma, st({a}), tau);
                REQUIRE(v.has_value());
                worst = std::max(worst, std::abs(v->at(0) - riccati_exact(tau, sigma, a)));
            }
    CHECK(worst <= 1e-8);
}

TEST_CASE("fifth order convergence with fixed steps")
{
    // x' = x is in the asymptotic regime already at a few steps.
    const auto g = catalog_field(*find_catalog("exp_scalar"));
    const double e = std::exp(1.0);
    const double g1 = std::abs(advance_fixed_step(g, 0.0, st({1.0}), 1.0, 16)[0] - e);
    const double g2 = std::abs(advance_fixed_step(g, 0.0, st({1.0}), 1.0, 32)[0] - e);
    MESSAGE("x' = x error ratio " << g1 / g2);
    CHECK(g1 / g2 >= 24.0);
    CHECK(g1 / g2 <= 40.0);

    // The riccati error changes sign for many samples at coarse steps; this
    // trajectory is monotone in h and stays well above round-off.
    const auto f = riccati_field();
    const double exact = riccati_exact(1.5, 0.0, -1.0);
    const double e1 = std::abs(advance_fixed_step(f, 0.0, st({-1.0}), 1.5, 64)[0] - exact);
    const double e2 = std::abs(advance_fixed_step(f, 0.0, st({-1.0}), 1.5, 128)[0] - exact);
    const double order = std::log2(e1 / e2);
    MESSAGE("riccati observed order " << order);
    CHECK(order >= 4.5);
    CHECK(order <= 5.6);
}

TEST_CASE("tightening tolerances reduces the error")
{
    const auto f = riccati_field();
    IntegratorConfig loose;
    loose.rel_tol = 1e-6;
    loose.abs_tol = 1e-8;
    const double exact = riccati_exact(1.5, 0.0, 0.5);
    const double el = std::abs(advance(f, 0.0, st({0.5}), 1.5, loose)->at(0) - exact);
    const double et = std::abs(advance(f, 0.0, st({0.5}), 1.5)->at(0) - exact);
    CHECK(et < el);
}

TEST_CASE("two-sided consistency")
{
    const auto f = catalog_field(*find_catalog("rotation"));
    for (double tau : {-1.0, 0.5, 3.0}) {
        const auto a = st({0.3, -0.7});
        auto there = advance(f, 0.0, a, tau);
        REQUIRE(there.has_value());
        auto back = advance(f, tau, *there, 0.0);
        REQUIRE(back.has_value());
        CHECK(max_abs_diff(*back, a) <= 10 * 1e-10);
    }
}

TEST_CASE("escape time does not depend on the target")
{
    const auto f = riccati_field();
    auto e1 = advance(f, 0.0, st({0.5}), 2.5);
    auto e2 = advance(f, 0.0, st({0.5}), 10.0);
    auto e3 = advance(f, 0.0, st({0.5}), 49.0);
    REQUIRE_FALSE(e1.has_value());
    REQUIRE_FALSE(e2.has_value());
    REQUIRE_FALSE(e3.has_value());
    CHECK(std::abs(e1.error().time - e2.error().time) <= 1e-6);
    CHECK(std::abs(e1.error().time - e3.error().time) <= 1e-6);
}

TEST_CASE("exponential growth stays a window limit")
{
    const auto j = escape_interval(catalog_field(*find_catalog("exp_scalar")), 0.0, st({1.0}));
    CHECK(j.upper_kind == EndpointKind::window_limit);
    CHECK(j.lower_kind == EndpointKind::window_limit);
}
