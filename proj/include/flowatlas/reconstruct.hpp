#pragma once

// Recovery of the generating vector field f(tau, a) = d/dtau F_{tau sigma}(a)
// at sigma = tau from a flow family, tabulated on a tensor grid.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <vector>

#include "flowatlas/core.hpp"
#include "flowatlas/exec.hpp"
#include "flowatlas/integrate.hpp"
#include "flowatlas/verify.hpp"

namespace flowatlas {

// Tensor grid over (t, x1..xn); every axis sorted and at least two points.
struct TabulationGrid
{
    std::vector<double> times;
    std::vector<std::vector<double>> axes;

    static TabulationGrid uniform(double t_lo, double t_hi, std::size_t t_points,
                                  const std::vector<std::pair<double, double>>& box, std::size_t points_per_axis);
    // Time grid of the plan and, per component, the distinct state values.
    static TabulationGrid from_plan(const SamplePlan& plan);

    std::size_t dimension() const { return axes.size(); }
    std::size_t site_count() const;
    void validate() const;
};

struct ReconstructionConfig
{
    double h = 1e-4;
    bool richardson = true;
    TabulationGrid grid;
    // When set, sites whose second tau-difference of F exceeds this bound are
    // rejected as not C1 enough to differentiate. Off by default.
    std::optional<double> smoothness_gate;
    Execution exec = Execution::parallel;
};

struct SampleSkipped
{
    double tau;
};

class ReconstructionFailed : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

enum class DifferenceScheme { central, forward };

// Pointwise estimate of d/dtau F_{tau sigma}(a) at sigma = tau. Central:
// [F_{tau+h,tau}(a) - F_{tau-h,tau}(a)] / 2h, optionally Richardson-combined
// with the h/2 estimate. Forward: [F_{tau+h,tau}(a) - a] / h.
Expected<State, SampleSkipped> estimate_field(const FlowFamily& fam, double tau, std::span<const double> a, double h,
                                              bool richardson, DifferenceScheme scheme = DifferenceScheme::central);

// Field values on a tensor grid with multilinear interpolation in between.
// Skipped sites hold NaN; interpolation touching one fails.
class TabulatedField
{
public:
    TabulatedField(TabulationGrid grid, std::vector<double> values);

    const TabulationGrid& grid() const { return grid_; }
    std::size_t dimension() const { return grid_.dimension(); }
    std::size_t skipped_sites() const;

    // Site values, row-major with time slowest; n values per site.
    std::span<const double> site(std::size_t index) const;
    std::vector<double> site_coordinates(std::size_t index) const; // (t, x1..xn)

    bool interpolate(double t, std::span<const double> x, std::span<double> out) const;

    // Domain: the open interior of the grid box, widened by a hair so that
    // grid-boundary sites remain evaluable.
    VectorField as_field() const;

    // CSV-like text: "# flowatlas tabulated field" header, "n,<n>", one
    // "axis,t,..." / "axis,x<k>,..." line per axis, then rows
    // "t,x1..xn,f1..fn" in site order ("nan" for skipped sites).
    void write(std::ostream& os) const;
    static TabulatedField read(std::istream& is);

private:
    TabulationGrid grid_;
    std::vector<double> values_;
};

// Throws ReconstructionFailed when more than half of the sites are skipped.
TabulatedField tabulate_field(const FlowFamily& fam, const ReconstructionConfig& cfg);
VectorField field_from_family(const FlowFamily& fam, const ReconstructionConfig& cfg);

struct RoundtripResult
{
    double max_error = 0.0;
    std::size_t checked = 0;
    std::size_t failed = 0; // original in-domain but the rebuilt flow escaped
    std::optional<SamplePoint> worst_case;
};

// Extra guard applied to (tau, sigma, a) before comparing.
using SampleGuard = std::function<bool(double tau, double sigma, std::span<const double> a)>;

// Family -> field -> numeric family, compared to the original over the grid
// triples of `check` (t1 = tau, t2 = sigma) that are in the original domain
// and pass `guard`.
RoundtripResult roundtrip(const FlowFamily& fam, const ReconstructionConfig& cfg, const IntegratorConfig& icfg,
                          const SamplePlan& check, const SampleGuard& guard = {});

// Maximum round-trip error; +inf if any guarded sample failed to integrate.
double roundtrip_error(const FlowFamily& fam, const ReconstructionConfig& cfg, const IntegratorConfig& icfg,
                       const SamplePlan& check, const SampleGuard& guard = {});

} // namespace flowatlas
