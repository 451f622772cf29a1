#include "flowatlas/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace flowatlas {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;

constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                 a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0, a75 = -2187.0 / 6784.0,
                 a76 = 11.0 / 84.0;

constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                 e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

constexpr double kSafety = 0.9;
constexpr double kFacMin = 0.2;
constexpr double kFacMax = 5.0;

// Per-call scratch; each integration owns one, so concurrent calls never share state.
struct Workspace
{
    explicit Workspace(std::size_t n) : k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), y_new(n), err(n) {}
    State k2, k3, k4, k5, k6, k7, tmp, y_new, err;
};

enum class StageFailure { none, rhs, nonfinite };

// One Dormand-Prince step of signed size h from (t, y) with k1 = f(t, y).
// Fills ws.y_new, ws.k7 and ws.err.
StageFailure dp_step(const VectorField& field, double t, const State& y, const State& k1, double h, Workspace& ws)
{
    const std::size_t n = y.size();
    auto stage = [&](double tc, State& k) { return field.rhs_into(tc, ws.tmp, k) && all_finite(k); };

    for (std::size_t i = 0; i < n; ++i)
        ws.tmp[i] = y[i] + h * a21 * k1[i];
    if (!stage(t + c2 * h, ws.k2))
        return StageFailure::rhs;
    for (std::size_t i = 0; i < n; ++i)
        ws.tmp[i] = y[i] + h * (a31 * k1[i] + a32 * ws.k2[i]);
    if (!stage(t + c3 * h, ws.k3))
        return StageFailure::rhs;
    for (std::size_t i = 0; i < n; ++i)
        ws.tmp[i] = y[i] + h * (a41 * k1[i] + a42 * ws.k2[i] + a43 * ws.k3[i]);
    if (!stage(t + c4 * h, ws.k4))
        return StageFailure::rhs;
    for (std::size_t i = 0; i < n; ++i)
        ws.tmp[i] = y[i] + h * (a51 * k1[i] + a52 * ws.k2[i] + a53 * ws.k3[i] + a54 * ws.k4[i]);
    if (!stage(t + c5 * h, ws.k5))
        return StageFailure::rhs;
    for (std::size_t i = 0; i < n; ++i)
        ws.tmp[i] = y[i] + h * (a61 * k1[i] + a62 * ws.k2[i] + a63 * ws.k3[i] + a64 * ws.k4[i] + a65 * ws.k5[i]);
    if (!stage(t + h, ws.k6))
        return StageFailure::rhs;
    for (std::size_t i = 0; i < n; ++i)
        ws.y_new[i] = y[i] + h * (a71 * k1[i] + a73 * ws.k3[i] + a74 * ws.k4[i] + a75 * ws.k5[i] + a76 * ws.k6[i]);
    if (!all_finite(ws.y_new))
        return StageFailure::nonfinite;
    ws.tmp = ws.y_new;
    if (!stage(t + h, ws.k7))
        return StageFailure::rhs;
    for (std::size_t i = 0; i < n; ++i)
        ws.err[i] = h * (e1 * k1[i] + e3 * ws.k3[i] + e4 * ws.k4[i] + e5 * ws.k5[i] + e6 * ws.k6[i] + e7 * ws.k7[i]);
    return StageFailure::none;
}

double error_norm(const Workspace& ws, const State& y, const IntegratorConfig& cfg)
{
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double scale = cfg.abs_tol + cfg.rel_tol * std::max(std::fabs(y[i]), std::fabs(ws.y_new[i]));
        const double r = ws.err[i] / scale;
        sum += r * r;
    }
    return std::sqrt(sum / static_cast<double>(y.size()));
}

struct Run
{
    bool ok = true;
    EscapeKind kind = EscapeKind::step_underflow;
    double t_ok = 0.0; // last accepted time (the target when ok)
    State y_ok;
    double t_bad = 0.0; // a time at which the failure was observed
};

bool is_blow_up(std::span<const double> y, std::span<const double> dy, double radius, double time_scale)
{
    const double norm = max_abs(y);
    if (!(norm > radius))
        return false;
    const double rate = max_abs(dy);
    return rate > 0.0 && norm / rate < time_scale;
}

// Plain adaptive integration from (t0, y0) to t1, stopping at the first
// failure. No escape-time refinement.
Run run(const VectorField& field, double t0, State y0, double t1, const IntegratorConfig& cfg)
{
    const std::size_t n = y0.size();
    const double radius = std::min(cfg.blowup_radius, field.domain().blowup_radius);
    Run res;
    res.t_ok = t0;
    res.t_bad = t0;
    res.y_ok = std::move(y0);
    if (t0 == t1)
        return res;

    State k1(n);
    auto fail = [&](EscapeKind kind, double t_bad) {
        res.ok = false;
        res.kind = kind;
        res.t_bad = t_bad;
        return res;
    };
    if (!field.rhs_into(t0, res.y_ok, k1) || !all_finite(k1))
        return fail(EscapeKind::left_domain, t0);

    Workspace ws(n);
    const double dir = t1 > t0 ? 1.0 : -1.0;
    double t = t0;
    State& y = res.y_ok;
    double h = std::min(cfg.h_init, std::fabs(t1 - t0));
    std::size_t steps = 0;
    StageFailure last_failure = StageFailure::none;

    while (t != t1) {
        if (++steps > cfg.max_steps)
            return fail(EscapeKind::step_underflow, t);
        const double remaining = std::fabs(t1 - t);
        const bool last = h >= remaining;
        if (last)
            h = remaining;

        const StageFailure sf = dp_step(field, t, y, k1, dir * h, ws);
        if (sf != StageFailure::none) {
            last_failure = sf;
            h *= 0.25;
            if (h < cfg.h_min)
                return fail(sf == StageFailure::nonfinite ? EscapeKind::blow_up : EscapeKind::left_domain,
                            t + dir * h);
            continue;
        }

        const double err = error_norm(ws, y, cfg);
        if (err <= 1.0) {
            const double t_new = last ? t1 : t + dir * h;
            if (!field.domain().contains(t_new, ws.y_new))
                return fail(EscapeKind::left_domain, t_new);
            if (is_blow_up(ws.y_new, ws.k7, radius, cfg.blowup_time_scale))
                return fail(EscapeKind::blow_up, t_new);
            t = t_new;
            res.t_ok = t;
            std::swap(y, ws.y_new);
            std::swap(k1, ws.k7);
            last_failure = StageFailure::none;
            const double fac = err == 0.0 ? kFacMax : std::clamp(kSafety * std::pow(err, -0.2), kFacMin, kFacMax);
            h *= fac;
        } else {
            h *= std::max(kFacMin, kSafety * std::pow(err, -0.2));
            if (h < cfg.h_min)
                return fail(last_failure == StageFailure::nonfinite ? EscapeKind::blow_up : EscapeKind::step_underflow,
                            t + dir * h);
        }
    }
    return res;
}

} // namespace

void IntegratorConfig::validate() const
{
    if (!(rel_tol > 0.0 && abs_tol > 0.0))
        throw std::invalid_argument("IntegratorConfig: tolerances must be positive");
    if (!(h_min > 0.0 && h_min < h_init))
        throw std::invalid_argument("IntegratorConfig: need 0 < h_min < h_init");
    if (!(blowup_radius > 0.0 && blowup_time_scale > 0.0))
        throw std::invalid_argument("IntegratorConfig: blow-up radius and time scale must be positive");
    if (!(std::isfinite(window_lo) && std::isfinite(window_hi) && window_lo < window_hi))
        throw std::invalid_argument("IntegratorConfig: window must be a finite nonempty interval");
    if (max_steps == 0)
        throw std::invalid_argument("IntegratorConfig: max_steps must be positive");
}

Expected<State, EscapeEvent> advance(const VectorField& field, double rho, std::span<const double> a, double tau,
                                     const IntegratorConfig& cfg)
{
    if (a.size() != field.dimension())
        throw std::invalid_argument("advance: state dimension mismatch");
    if (rho < cfg.window_lo || rho > cfg.window_hi)
        return EscapeEvent{EscapeKind::window_limit, std::clamp(rho, cfg.window_lo, cfg.window_hi)};
    if (!field.domain().contains(rho, a))
        return EscapeEvent{EscapeKind::left_domain, rho};
    if (tau == rho)
        return State(a.begin(), a.end());

    const double target = std::clamp(tau, cfg.window_lo, cfg.window_hi);
    const OpenInterval box = field.domain().time_box;
    const double end = std::clamp(target, box.lo, box.hi);

    Run r = run(field, rho, State(a.begin(), a.end()), end, cfg);
    if (r.ok) {
        if (end != target)
            return EscapeEvent{EscapeKind::left_domain, end};
        if (target != tau)
            return EscapeEvent{EscapeKind::window_limit, target};
        return std::move(r.y_ok);
    }
    if (r.kind == EscapeKind::step_underflow)
        return EscapeEvent{r.kind, r.t_ok};

    // Bisect on the failing step: [lo, hi] always brackets the escape.
    double lo = r.t_ok;
    State y_lo = std::move(r.y_ok);
    double hi = r.t_bad;
    while (std::fabs(hi - lo) > 0.5 * kEscapeBracket) {
        const double mid = 0.5 * (lo + hi);
        Run probe = run(field, lo, y_lo, mid, cfg);
        if (probe.ok) {
            lo = mid;
            y_lo = std::move(probe.y_ok);
        } else {
            lo = probe.t_ok;
            y_lo = std::move(probe.y_ok);
            hi = probe.t_bad;
        }
    }
    return EscapeEvent{r.kind, 0.5 * (lo + hi)};
}

FlowFamily numeric_family(VectorField field, IntegratorConfig cfg)
{
    cfg.validate();
    const OpenInterval box = field.domain().time_box;
    const OpenInterval range{std::max(cfg.window_lo, box.lo), std::min(cfg.window_hi, box.hi)};
    const std::size_t n = field.dimension();
    return FlowFamily(
        n, FamilyKind::numeric,
        [field = std::move(field), cfg](double tau, double sigma,
                                        std::span<const double> a) -> Expected<State, DomainViolation> {
            if (!field.domain().contains(sigma, a))
                return DomainViolation{};
            auto r = advance(field, sigma, a, tau, cfg);
            if (!r)
                return DomainViolation{ViolationKind::out_of_domain, r.error().kind, r.error().time};
            return std::move(r).value();
        },
        {}, range);
}

EndpointKind endpoint_kind(EscapeKind kind)
{
    switch (kind) {
    case EscapeKind::blow_up: return EndpointKind::blow_up;
    case EscapeKind::left_domain: return EndpointKind::left_domain;
    case EscapeKind::window_limit: return EndpointKind::window_limit;
    case EscapeKind::step_underflow: return EndpointKind::blow_up;
    }
    return EndpointKind::blow_up;
}

EscapeInterval escape_interval(const VectorField& field, double rho, std::span<const double> a,
                               const IntegratorConfig& cfg)
{
    cfg.validate();
    if (!field.domain().contains(rho, a))
        throw std::invalid_argument("escape_interval: (rho, a) is not in the domain of the field");
    EscapeInterval J;
    J.upper = cfg.window_hi;
    J.upper_kind = EndpointKind::window_limit;
    if (auto fwd = advance(field, rho, a, cfg.window_hi, cfg); !fwd) {
        J.upper = fwd.error().time;
        J.upper_kind = endpoint_kind(fwd.error().kind);
    }
    J.lower = cfg.window_lo;
    J.lower_kind = EndpointKind::window_limit;
    if (auto bwd = advance(field, rho, a, cfg.window_lo, cfg); !bwd) {
        J.lower = bwd.error().time;
        J.lower_kind = endpoint_kind(bwd.error().kind);
    }
    return J;
}

State advance_fixed_step(const VectorField& field, double rho, std::span<const double> a, double tau,
                         std::size_t steps)
{
    if (steps == 0)
        throw std::invalid_argument("advance_fixed_step: steps must be positive");
    const std::size_t n = a.size();
    Workspace ws(n);
    State y(a.begin(), a.end());
    State k1(n);
    const double h = (tau - rho) / static_cast<double>(steps);
    for (std::size_t i = 0; i < steps; ++i) {
        const double t = rho + static_cast<double>(i) * h;
        if (!field.rhs_into(t, y, k1) || dp_step(field, t, y, k1, h, ws) != StageFailure::none)
            throw std::runtime_error("advance_fixed_step: right-hand side failed");
        std::swap(y, ws.y_new);
    }
    return y;
}

} // namespace flowatlas
