#pragma once

// Adaptive Dormand-Prince 5(4) integration with escape tracking: numeric
// flow families and the endpoints of J(rho, a).

#include <cstddef>
#include <span>

#include "flowatlas/core.hpp"

namespace flowatlas {

struct IntegratorConfig
{
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double h_init = 1e-3;
    double h_min = 1e-12;
    double blowup_radius = 1e6;
    // A radius crossing counts as blow-up only if the local growth time
    // |x| / |f(t, x)| has dropped below this; exponential growth of a
    // globally defined solution is not a finite-time escape.
    double blowup_time_scale = 1e-3;
    double window_lo = -50.0;
    double window_hi = 50.0;
    std::size_t max_steps = 1'000'000;

    // Throws std::invalid_argument on inconsistent settings.
    void validate() const;
};

struct EscapeEvent
{
    EscapeKind kind;
    double time;
};

// Escape times are bracketed to this width.
inline constexpr double kEscapeBracket = 1e-6;

// x(tau) for x' = f(t, x), x(rho) = a. Integrates backward when tau < rho.
Expected<State, EscapeEvent> advance(const VectorField& field, double rho, std::span<const double> a, double tau,
                                     const IntegratorConfig& cfg = {});

// The family F_{tau sigma}(a) = advance(field, sigma, a, tau).
FlowFamily numeric_family(VectorField field, IntegratorConfig cfg = {});

// J(rho, a) clipped to the integration window.
EscapeInterval escape_interval(const VectorField& field, double rho, std::span<const double> a,
                               const IntegratorConfig& cfg = {});

EndpointKind endpoint_kind(EscapeKind kind);

// Fixed-step Dormand-Prince 5th order solution with `steps` equal steps and
// no escape handling. Used to measure the convergence order.
State advance_fixed_step(const VectorField& field, double rho, std::span<const double> a, double tau,
                         std::size_t steps);

} // namespace flowatlas
