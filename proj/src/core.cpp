#include "flowatlas/core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flowatlas {

bool all_finite(std::span<const double> x)
{
    return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

double max_abs(std::span<const double> x)
{
    double m = 0.0;
    for (double v : x)
        m = std::max(m, std::fabs(v));
    return m;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size())
        throw std::invalid_argument("max_abs_diff: size mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = std::fabs(a[i] - b[i]);
        if (std::isnan(d))
            return kInf;
        m = std::max(m, d);
    }
    return m;
}

bool approx_equal(std::span<const double> actual, std::span<const double> expected, Tolerance tol)
{
    if (actual.size() != expected.size())
        return false;
    for (std::size_t i = 0; i < actual.size(); ++i)
        if (!(std::fabs(actual[i] - expected[i]) <= tol.atol + tol.rtol * std::fabs(expected[i])))
            return false;
    return true;
}

bool DomainSpec::contains(double t, std::span<const double> x) const
{
    if (x.size() != n || !std::isfinite(t) || !all_finite(x))
        return false;
    if (!time_box.contains(t))
        return false;
    if (!state_box.empty()) {
        for (std::size_t i = 0; i < n; ++i)
            if (!state_box[i].contains(x[i]))
                return false;
    }
    if (predicate) {
        const auto v = expr::evaluate(*predicate, t, x);
        if (!v || !(*v > 0.0))
            return false;
    }
    return true;
}

VectorField::VectorField(DomainSpec domain, Rhs rhs, std::string description)
    : domain_(std::move(domain)), rhs_(std::move(rhs)), description_(std::move(description))
{
    if (domain_.n == 0)
        throw std::invalid_argument("VectorField: dimension must be at least 1");
    if (!domain_.state_box.empty() && domain_.state_box.size() != domain_.n)
        throw std::invalid_argument("VectorField: state box dimension mismatch");
    if (!rhs_)
        throw std::invalid_argument("VectorField: empty right-hand side");
}

VectorField VectorField::from_expressions(DomainSpec domain, std::vector<expr::Expression> rhs)
{
    if (rhs.size() != domain.n)
        throw std::invalid_argument("VectorField: expected " + std::to_string(domain.n) + " right-hand side expressions, got "
                                    + std::to_string(rhs.size()));
    for (const auto& e : rhs) {
        if (e.dialect() != expr::Dialect::field)
            throw std::invalid_argument("VectorField: right-hand side must use t, x1..xn");
        if (auto err = expr::validate(e, domain.n))
            throw std::invalid_argument("VectorField: unknown variable " + err->variable);
    }
    if (domain.predicate) {
        if (auto err = expr::validate(*domain.predicate, domain.n))
            throw std::invalid_argument("VectorField: domain predicate uses unknown variable " + err->variable);
    }
    std::string description;
    for (std::size_t i = 0; i < rhs.size(); ++i) {
        if (i)
            description += ", ";
        description += expr::pretty_print(rhs[i]);
    }
    auto exprs = rhs;
    VectorField field(
        std::move(domain),
        [exprs = std::move(rhs)](double t, std::span<const double> x, std::span<double> dx) {
            for (std::size_t i = 0; i < exprs.size(); ++i) {
                const auto v = expr::evaluate(exprs[i], t, x);
                if (!v)
                    return false;
                dx[i] = *v;
            }
            return true;
        },
        std::move(description));
    field.expressions_ = std::move(exprs);
    return field;
}

bool VectorField::evaluate_into(double t, std::span<const double> x, std::span<double> dx) const
{
    return domain_.contains(t, x) && rhs_(t, x, dx);
}

Expected<State, FieldError> VectorField::evaluate(double t, std::span<const double> x) const
{
    if (x.size() != domain_.n)
        return FieldError{FieldErrorKind::dimension_mismatch, "expected dimension " + std::to_string(domain_.n)};
    if (!domain_.contains(t, x))
        return FieldError{FieldErrorKind::out_of_domain, {}};
    State dx(domain_.n);
    if (!rhs_(t, x, dx) || !all_finite(dx))
        return FieldError{FieldErrorKind::evaluation, {}};
    return dx;
}

FlowFamily::FlowFamily(std::size_t n, FamilyKind kind, Evaluator evaluator, DomainQuery domain_query,
                       std::optional<OpenInterval> time_range)
    : n_(n), kind_(kind), evaluator_(std::move(evaluator)), domain_query_(std::move(domain_query)),
      time_range_(time_range)
{
    if (n_ == 0)
        throw std::invalid_argument("FlowFamily: dimension must be at least 1");
    if (!evaluator_)
        throw std::invalid_argument("FlowFamily: empty evaluator");
}

Expected<State, DomainViolation> FlowFamily::evaluate(double tau, double sigma, std::span<const double> a) const
{
    if (a.size() != n_)
        return DomainViolation{ViolationKind::dimension_mismatch};
    if (!std::isfinite(tau) || !std::isfinite(sigma) || !all_finite(a))
        return DomainViolation{};
    if (time_range_ && !(time_range_->contains(tau) && time_range_->contains(sigma)))
        return DomainViolation{};
    if (domain_query_ && !domain_query_(tau, sigma, a))
        return DomainViolation{};
    auto r = evaluator_(tau, sigma, a);
    if (r && !all_finite(*r))
        return DomainViolation{};
    return r;
}

bool FlowFamily::in_domain(double tau, double sigma, std::span<const double> a) const
{
    if (a.size() != n_ || !std::isfinite(tau) || !std::isfinite(sigma) || !all_finite(a))
        return false;
    if (time_range_ && !(time_range_->contains(tau) && time_range_->contains(sigma)))
        return false;
    if (domain_query_)
        return domain_query_(tau, sigma, a);
    return evaluate(tau, sigma, a).has_value();
}

FlowFamily closed_form_family(std::size_t n, std::vector<expr::Expression> components,
                              std::optional<expr::Expression> domain_predicate)
{
    if (components.size() != n)
        throw std::invalid_argument("closed_form_family: expected " + std::to_string(n) + " components, got "
                                    + std::to_string(components.size()));
    for (const auto& e : components) {
        if (e.dialect() != expr::Dialect::family)
            throw std::invalid_argument("closed_form_family: components must use tau, sigma, a1..an");
        if (auto err = expr::validate(e, n))
            throw std::invalid_argument("closed_form_family: unknown variable " + err->variable);
    }
    if (domain_predicate) {
        if (domain_predicate->dialect() != expr::Dialect::family)
            throw std::invalid_argument("closed_form_family: predicate must use tau, sigma, a1..an");
        if (auto err = expr::validate(*domain_predicate, n))
            throw std::invalid_argument("closed_form_family: unknown variable " + err->variable);
    }
    return FlowFamily(
        n, FamilyKind::closed_form,
        [components = std::move(components), pred = std::move(domain_predicate)](
            double tau, double sigma, std::span<const double> a) -> Expected<State, DomainViolation> {
            const expr::Env env{tau, sigma, a};
            if (pred) {
                const auto p = expr::evaluate(*pred, env);
                if (!p || !(*p > 0.0))
                    return DomainViolation{};
            }
            State out(components.size());
            for (std::size_t i = 0; i < components.size(); ++i) {
                const auto v = expr::evaluate(components[i], env);
                if (!v)
                    return DomainViolation{};
                out[i] = *v;
            }
            return out;
        });
}

FlowFamily empty_family(std::size_t n)
{
    return FlowFamily(
        n, FamilyKind::closed_form,
        [](double, double, std::span<const double>) -> Expected<State, DomainViolation> { return DomainViolation{}; },
        [](double, double, std::span<const double>) { return false; });
}

FlowFamily shifted_family(const FlowFamily& fam, double shift)
{
    std::optional<OpenInterval> range;
    if (fam.time_range())
        range = OpenInterval{fam.time_range()->lo - shift, fam.time_range()->hi - shift};
    return FlowFamily(
        fam.dimension(), fam.kind(),
        [fam, shift](double tau, double sigma, std::span<const double> a) {
            return fam.evaluate(tau + shift, sigma + shift, a);
        },
        [fam, shift](double tau, double sigma, std::span<const double> a) {
            return fam.in_domain(tau + shift, sigma + shift, a);
        },
        range);
}

Expected<State, DomainViolation> solution_value(const CompleteSolution& sol, const FlowFamily& fam, double tau)
{
    if (sol.a.size() != fam.dimension())
        return DomainViolation{ViolationKind::dimension_mismatch};
    if (!sol.interval.contains(tau))
        return DomainViolation{};
    return fam.evaluate(tau, sol.rho, sol.a);
}

namespace {

// One side of scan_interval; direction is +1 or -1.
std::pair<double, EndpointKind> scan_side(const FlowFamily& fam, double rho, std::span<const double> a, double edge,
                                          double direction, double step, double resolution)
{
    double inside = rho;
    while (true) {
        double next = inside + direction * step;
        if (direction * (next - edge) >= 0.0) {
            if (fam.in_domain(edge, rho, a))
                return {edge, EndpointKind::window_limit};
            next = edge;
        }
        if (!fam.in_domain(next, rho, a)) {
            double out = next;
            while (std::fabs(out - inside) > resolution) {
                const double mid = 0.5 * (inside + out);
                if (fam.in_domain(mid, rho, a))
                    inside = mid;
                else
                    out = mid;
            }
            return {out, EndpointKind::left_domain};
        }
        inside = next;
        if (inside == edge)
            return {edge, EndpointKind::window_limit};
    }
}

} // namespace

EscapeInterval scan_interval(const FlowFamily& fam, double rho, std::span<const double> a, OpenInterval window,
                             double step, double resolution)
{
    if (!(std::isfinite(window.lo) && std::isfinite(window.hi) && window.contains(rho)))
        throw std::invalid_argument("scan_interval: rho must lie inside a finite window");
    if (!(step > 0.0 && resolution > 0.0))
        throw std::invalid_argument("scan_interval: step and resolution must be positive");
    if (!fam.in_domain(rho, rho, a))
        throw std::invalid_argument("scan_interval: (rho, a) is not in the domain");
    EscapeInterval J;
    std::tie(J.upper, J.upper_kind) = scan_side(fam, rho, a, window.hi, 1.0, step, resolution);
    std::tie(J.lower, J.lower_kind) = scan_side(fam, rho, a, window.lo, -1.0, step, resolution);
    return J;
}

const char* to_string(FamilyKind kind)
{
    switch (kind) {
    case FamilyKind::closed_form: return "closed_form";
    case FamilyKind::numeric: return "numeric";
    case FamilyKind::group_backed: return "group_backed";
    case FamilyKind::affine_backed: return "affine_backed";
    }
    return "unknown";
}

const char* to_string(EscapeKind kind)
{
    switch (kind) {
    case EscapeKind::blow_up: return "blow_up";
    case EscapeKind::left_domain: return "left_domain";
    case EscapeKind::window_limit: return "window_limit";
    case EscapeKind::step_underflow: return "step_underflow";
    }
    return "unknown";
}

const char* to_string(EndpointKind kind)
{
    switch (kind) {
    case EndpointKind::blow_up: return "blow_up";
    case EndpointKind::left_domain: return "left_domain";
    case EndpointKind::window_limit: return "window_limit";
    case EndpointKind::unbounded: return "unbounded";
    }
    return "unknown";
}

const char* to_string(ViolationKind kind)
{
    switch (kind) {
    case ViolationKind::out_of_domain: return "out_of_domain";
    case ViolationKind::dimension_mismatch: return "dimension_mismatch";
    }
    return "unknown";
}

} // namespace flowatlas
