#pragma once

// Shared domain types: states, open domains, vector fields, two-parameter
// flow families F(tau, sigma, a) and the open existence intervals J(rho, a).

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "flowatlas/expected.hpp"
#include "flowatlas/expr.hpp"

namespace flowatlas {

using State = std::vector<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

bool all_finite(std::span<const double> x);
double max_abs(std::span<const double> x);
double max_abs_diff(std::span<const double> a, std::span<const double> b);

// The one comparison rule: |actual_i - expected_i| <= atol + rtol * |expected_i|.
struct Tolerance
{
    double atol = 1e-9;
    double rtol = 1e-9;
};

bool approx_equal(std::span<const double> actual, std::span<const double> expected, Tolerance tol = {});

// Open interval of reals; infinite bounds allowed.
struct OpenInterval
{
    double lo = -kInf;
    double hi = kInf;

    bool contains(double t) const { return lo < t && t < hi; }
};

// Open subset of R x R^n: open time interval, optional open state box and an
// optional predicate whose strict positivity defines membership.
struct DomainSpec
{
    std::size_t n = 1;
    OpenInterval time_box{};
    std::vector<OpenInterval> state_box; // empty, or one interval per component
    std::optional<expr::Expression> predicate;
    double blowup_radius = 1e6;

    // Total on finite input; a predicate evaluation error counts as "outside".
    bool contains(double t, std::span<const double> x) const;
};

enum class FieldErrorKind { dimension_mismatch, out_of_domain, evaluation };

struct FieldError
{
    FieldErrorKind kind;
    std::string detail;
};

// Right-hand side f(t, x) of x' = f(t, x) restricted to an open domain.
class VectorField
{
public:
    // Writes f(t, x) into dx; returns false when f cannot be evaluated.
    using Rhs = std::function<bool(double t, std::span<const double> x, std::span<double> dx)>;

    VectorField(DomainSpec domain, Rhs rhs, std::string description = {});

    // Throws std::invalid_argument when an expression fails validation or
    // the count does not match the dimension.
    static VectorField from_expressions(DomainSpec domain, std::vector<expr::Expression> rhs);

    std::size_t dimension() const { return domain_.n; }
    const DomainSpec& domain() const { return domain_; }
    const std::string& description() const { return description_; }
    const std::vector<expr::Expression>& expressions() const { return expressions_; }

    // Raw right-hand side, no membership test.
    bool rhs_into(double t, std::span<const double> x, std::span<double> dx) const { return rhs_(t, x, dx); }

    // Membership test followed by the right-hand side.
    bool evaluate_into(double t, std::span<const double> x, std::span<double> dx) const;
    Expected<State, FieldError> evaluate(double t, std::span<const double> x) const;

private:
    DomainSpec domain_;
    Rhs rhs_;
    std::string description_;
    std::vector<expr::Expression> expressions_;
};

enum class ViolationKind { out_of_domain, dimension_mismatch };

enum class EscapeKind { blow_up, left_domain, window_limit, step_underflow };

struct DomainViolation
{
    ViolationKind kind = ViolationKind::out_of_domain;
    // Set by integrator-backed families when the violation is an escape.
    std::optional<EscapeKind> escape;
    double escape_time = 0.0;
};

enum class FamilyKind { closed_form, numeric, group_backed, affine_backed };

// The family {F_{tau sigma}} of maps sending the state at time sigma to the
// state at time tau. Immutable; evaluate/in_domain are safe to call from any
// number of threads.
class FlowFamily
{
public:
    using Evaluator = std::function<Expected<State, DomainViolation>(double tau, double sigma, std::span<const double> a)>;
    using DomainQuery = std::function<bool(double tau, double sigma, std::span<const double> a)>;

    // Without a domain query, membership is "evaluator succeeds".
    FlowFamily(std::size_t n, FamilyKind kind, Evaluator evaluator, DomainQuery domain_query = {},
               std::optional<OpenInterval> time_range = std::nullopt);

    std::size_t dimension() const { return n_; }
    FamilyKind kind() const { return kind_; }
    // Times outside this range are never in the domain (nullopt: unrestricted).
    const std::optional<OpenInterval>& time_range() const { return time_range_; }

    Expected<State, DomainViolation> evaluate(double tau, double sigma, std::span<const double> a) const;
    bool in_domain(double tau, double sigma, std::span<const double> a) const;

private:
    std::size_t n_;
    FamilyKind kind_;
    Evaluator evaluator_;
    DomainQuery domain_query_;
    std::optional<OpenInterval> time_range_;
};

// Closed-form family from family-dialect expressions (tau, sigma, a1..an).
// Membership: predicate > 0 (when given) and every component evaluates.
FlowFamily closed_form_family(std::size_t n, std::vector<expr::Expression> components,
                              std::optional<expr::Expression> domain_predicate = std::nullopt);

// Family whose every map is the empty mapping.
FlowFamily empty_family(std::size_t n);

// F_{tau sigma}(a) = F_{tau + shift, sigma + shift}(a).
FlowFamily shifted_family(const FlowFamily& fam, double shift);

enum class EndpointKind { blow_up, left_domain, window_limit, unbounded };

// The open interval J(rho, a) with endpoint classification.
struct EscapeInterval
{
    double lower = -kInf;
    double upper = kInf;
    EndpointKind lower_kind = EndpointKind::unbounded;
    EndpointKind upper_kind = EndpointKind::unbounded;

    bool contains(double t) const { return lower < t && t < upper; }
};

// A maximal solution labelled by its Cauchy datum x(rho) = a.
struct CompleteSolution
{
    double rho = 0.0;
    State a;
    EscapeInterval interval;
};

// x(tau) = F_{tau rho}(a) for tau in J(rho, a), out_of_domain otherwise.
Expected<State, DomainViolation> solution_value(const CompleteSolution& sol, const FlowFamily& fam, double tau);

// J(rho, a) estimated from domain queries alone: march outward from rho in
// steps of `step` up to the window edges and bisect each detected boundary
// down to `resolution`. Boundaries found this way are reported as left_domain.
EscapeInterval scan_interval(const FlowFamily& fam, double rho, std::span<const double> a, OpenInterval window,
                             double step = 1e-2, double resolution = 1e-9);

const char* to_string(FamilyKind kind);
const char* to_string(EscapeKind kind);
const char* to_string(EndpointKind kind);
const char* to_string(ViolationKind kind);

} // namespace flowatlas
