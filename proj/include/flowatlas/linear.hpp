#pragma once

// Affine flow families: the decomposition
//   F_{tau sigma}(a) = W_tau (W_sigma^{-1} a + h_tau - h_sigma)
// into a Wronski matrix W and shifts h, its consistency with an affine
// vector field, and the mollifier average of a continuous affine group.

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "flowatlas/autonomous.hpp"
#include "flowatlas/core.hpp"
#include "flowatlas/verify.hpp"

namespace flowatlas {

inline constexpr double kSingularRatio = 1e-12;

// a -> A a + b
struct AffineMap
{
    Eigen::MatrixXd A;
    Eigen::VectorXd b;

    static AffineMap identity(std::size_t n);

    std::size_t dimension() const { return static_cast<std::size_t>(b.size()); }
    State apply(std::span<const double> a) const;
    // this o other
    AffineMap compose(const AffineMap& other) const;
    // Throws NotInvertible.
    AffineMap inverse() const;

    double smallest_singular_value() const;
    // smallest / largest singular value > kSingularRatio
    bool invertible() const;
    // max of entrywise |A - other.A| and |b - other.b|
    double distance(const AffineMap& other) const;
};

class NotAffine : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class NotInvertible : public std::runtime_error
{
public:
    NotInvertible(const std::string& what, double smallest_singular_value)
        : std::runtime_error(what), smallest_singular_value(smallest_singular_value)
    {
    }
    double smallest_singular_value;
};

class SingularWronskian : public NotInvertible
{
public:
    using NotInvertible::NotInvertible;
};

// Probe an affine map at 0 and at the standard basis vectors.
// Throws NotAffine if a probe point is outside the domain.
AffineMap extract_affine(const std::function<Expected<State, DomainViolation>(std::span<const double>)>& map,
                         std::size_t n);

ConditionReport affinity_report(const FlowFamily& fam, const SamplePlan& plan, double tol,
                                Execution exec = Execution::parallel);
bool detect_affine(const FlowFamily& fam, const SamplePlan& plan, double tol, Execution exec = Execution::parallel);

struct SincovDecomposition
{
    double tau0 = 0.0;
    std::vector<double> grid; // sorted
    std::vector<Eigen::MatrixXd> W;
    std::vector<Eigen::VectorXd> h;
    // Dom F_{tau sigma} is empty unless tau and sigma lie in [grid.front(), grid.back()].
    bool enforce_time_domain = true;

    std::size_t dimension() const { return h.empty() ? 0 : static_cast<std::size_t>(h.front().size()); }
    // Entrywise linear interpolation (extrapolation from the end segments).
    Eigen::MatrixXd W_at(double tau) const;
    Eigen::VectorXd h_at(double tau) const;
    // W_tau h_tau = F_{tau tau0}(0)
    Eigen::VectorXd particular(double tau) const { return W_at(tau) * h_at(tau); }

    // One row per grid time: tau, row-major W entries, h entries.
    void write(std::ostream& os) const;
    static SincovDecomposition read(std::istream& is, bool enforce_time_domain = true);
};

// Gauge W_{tau0} = I, h_{tau0} = 0. Throws NotAffine (affinity probe failed
// or a map undefined) or SingularWronskian.
SincovDecomposition sincov_decompose(const FlowFamily& fam, double tau0, const std::vector<double>& grid,
                                     double affine_tol = 1e-8);

FlowFamily family_from_decomposition(const SincovDecomposition& dec);

class NotAffineField : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// Residuals of dW/dtau - A(tau) W and d(W h)/dtau - (A(tau) W h + c(tau)) on
// interior grid times by central differences, where f(tau, x) = A x + c.
// The report's residual is the larger of the two.
ConditionReport wronski_consistency(const SincovDecomposition& dec, const VectorField& field, double tol);

struct Mollifier
{
    double epsilon = 0.0;
    AffineMap H;
    std::size_t panels = 0;
    double smallest_singular_value = 0.0;
    // (2 eps)^5 / panels^4: the composite Simpson error scale
    double quadrature_error_scale = 0.0;
};

// Composite Simpson average of G_beta over beta in [-eps, eps].
// Throws NotInvertible (eps too large) or NotAffine.
Mollifier mollify(const OneParamGroup& g, double epsilon, std::size_t panels = 256);

// Average of G_gamma o H^{-1} over gamma in [alpha - eps, alpha + eps].
AffineMap smooth_apply(const OneParamGroup& g, const Mollifier& m, double alpha);

// G_alpha as an affine map.
AffineMap group_affine(const OneParamGroup& g, double alpha);

// A group whose maps are given directly as affine maps.
OneParamGroup affine_group(std::size_t n, std::function<AffineMap(double)> maps);

} // namespace flowatlas
