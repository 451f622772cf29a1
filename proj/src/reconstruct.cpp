#include "flowatlas/reconstruct.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

namespace flowatlas {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_axis(const std::vector<double>& axis, const char* what)
{
    if (axis.size() < 2)
        throw std::invalid_argument(std::string("TabulationGrid: ") + what + " axis needs at least two points");
    for (std::size_t i = 1; i < axis.size(); ++i)
        if (!(axis[i] > axis[i - 1]))
            throw std::invalid_argument(std::string("TabulationGrid: ") + what + " axis must be strictly increasing");
}

std::vector<double> linspace(double lo, double hi, std::size_t points)
{
    std::vector<double> v(points);
    for (std::size_t i = 0; i < points; ++i)
        v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    v.back() = hi;
    return v;
}

// Cell index and weight of the upper node; false outside [front, back].
bool locate(const std::vector<double>& axis, double v, std::size_t& cell, double& w)
{
    if (!(v >= axis.front() && v <= axis.back()))
        return false;
    auto it = std::upper_bound(axis.begin(), axis.end(), v);
    std::size_t hi = static_cast<std::size_t>(it - axis.begin());
    if (hi == axis.size())
        hi = axis.size() - 1;
    cell = hi - 1;
    w = (v - axis[cell]) / (axis[hi] - axis[cell]);
    return true;
}

std::string format_double(double v)
{
    if (std::isnan(v))
        return "nan";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s)
{
    if (s == "nan")
        return kNaN;
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw std::runtime_error("tabulated field: bad number '" + s + "'");
    return v;
}

std::vector<std::string> split_csv(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
        out.push_back(cell);
    return out;
}

} // namespace

TabulationGrid TabulationGrid::uniform(double t_lo, double t_hi, std::size_t t_points,
                                       const std::vector<std::pair<double, double>>& box,
                                       std::size_t points_per_axis)
{
    TabulationGrid g;
    g.times = linspace(t_lo, t_hi, t_points);
    for (const auto& [lo, hi] : box)
        g.axes.push_back(linspace(lo, hi, points_per_axis));
    g.validate();
    return g;
}

TabulationGrid TabulationGrid::from_plan(const SamplePlan& plan)
{
    TabulationGrid g;
    g.times = plan.time_grid;
    const std::size_t n = plan.state_grid.empty() ? 0 : plan.state_grid.front().size();
    g.axes.resize(n);
    for (const auto& s : plan.state_grid)
        for (std::size_t i = 0; i < n; ++i)
            g.axes[i].push_back(s[i]);
    for (auto& axis : g.axes) {
        std::sort(axis.begin(), axis.end());
        axis.erase(std::unique(axis.begin(), axis.end()), axis.end());
    }
    g.validate();
    return g;
}

std::size_t TabulationGrid::site_count() const
{
    std::size_t count = times.size();
    for (const auto& a : axes)
        count *= a.size();
    return count;
}

void TabulationGrid::validate() const
{
    if (axes.empty())
        throw std::invalid_argument("TabulationGrid: need at least one state axis");
    check_axis(times, "time");
    for (const auto& a : axes)
        check_axis(a, "state");
}

Expected<State, SampleSkipped> estimate_field(const FlowFamily& fam, double tau, std::span<const double> a, double h,
                                              bool richardson, DifferenceScheme scheme)
{
    if (scheme == DifferenceScheme::forward) {
        const auto fwd = fam.evaluate(tau + h, tau, a);
        if (!fwd)
            return SampleSkipped{tau};
        State d(a.size());
        for (std::size_t i = 0; i < a.size(); ++i)
            d[i] = ((*fwd)[i] - a[i]) / h;
        return d;
    }
    auto central = [&](double step) -> std::optional<State> {
        const auto plus = fam.evaluate(tau + step, tau, a);
        const auto minus = fam.evaluate(tau - step, tau, a);
        if (!plus || !minus)
            return std::nullopt;
        State d(a.size());
        for (std::size_t i = 0; i < a.size(); ++i)
            d[i] = ((*plus)[i] - (*minus)[i]) / (2.0 * step);
        return d;
    };
    auto coarse = central(h);
    if (!coarse)
        return SampleSkipped{tau};
    if (!richardson)
        return std::move(*coarse);
    auto fine = central(0.5 * h);
    if (!fine)
        return SampleSkipped{tau};
    State d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        d[i] = (4.0 * (*fine)[i] - (*coarse)[i]) / 3.0;
    return d;
}

TabulatedField::TabulatedField(TabulationGrid grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values))
{
    grid_.validate();
    if (values_.size() != grid_.site_count() * grid_.dimension())
        throw std::invalid_argument("TabulatedField: value count does not match the grid");
}

std::size_t TabulatedField::skipped_sites() const
{
    const std::size_t n = dimension();
    std::size_t count = 0;
    for (std::size_t s = 0; s < grid_.site_count(); ++s)
        if (std::isnan(values_[s * n]))
            ++count;
    return count;
}

std::span<const double> TabulatedField::site(std::size_t index) const
{
    return std::span<const double>(values_).subspan(index * dimension(), dimension());
}

std::vector<double> TabulatedField::site_coordinates(std::size_t index) const
{
    const std::size_t n = dimension();
    std::vector<double> c(n + 1);
    std::size_t rem = index;
    for (std::size_t k = n; k-- > 0;) {
        const auto& axis = grid_.axes[k];
        c[k + 1] = axis[rem % axis.size()];
        rem /= axis.size();
    }
    c[0] = grid_.times[rem];
    return c;
}

bool TabulatedField::interpolate(double t, std::span<const double> x, std::span<double> out) const
{
    const std::size_t n = dimension();
    if (x.size() != n || out.size() != n)
        return false;
    // Dimension d = n + 1 (time first), corners enumerated by bitmask.
    const std::size_t d = n + 1;
    std::size_t cells[16];
    double weights[16];
    if (d > 16)
        return false;
    if (!locate(grid_.times, t, cells[0], weights[0]))
        return false;
    for (std::size_t k = 0; k < n; ++k)
        if (!locate(grid_.axes[k], x[k], cells[k + 1], weights[k + 1]))
            return false;
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
        double w = 1.0;
        std::size_t index = 0;
        for (std::size_t k = 0; k < d; ++k) {
            const bool upper = (mask >> k) & 1u;
            w *= upper ? weights[k] : 1.0 - weights[k];
            const std::size_t axis_size = k == 0 ? grid_.times.size() : grid_.axes[k - 1].size();
            index = index * axis_size + cells[k] + (upper ? 1 : 0);
        }
        if (w == 0.0)
            continue;
        const auto v = site(index);
        for (std::size_t i = 0; i < n; ++i) {
            if (std::isnan(v[i]))
                return false;
            out[i] += w * v[i];
        }
    }
    return true;
}

VectorField TabulatedField::as_field() const
{
    DomainSpec dom;
    dom.n = dimension();
    auto widen = [](const std::vector<double>& axis) {
        const double pad = 1e-12 * std::max(1.0, std::max(std::fabs(axis.front()), std::fabs(axis.back())));
        return OpenInterval{axis.front() - pad, axis.back() + pad};
    };
    dom.time_box = widen(grid_.times);
    for (const auto& axis : grid_.axes)
        dom.state_box.push_back(widen(axis));
    auto self = std::make_shared<const TabulatedField>(*this);
    return VectorField(
        std::move(dom),
        [self](double t, std::span<const double> x, std::span<double> dx) {
            // Clamp the padding back onto the grid.
            const auto& g = self->grid();
            const double tc = std::clamp(t, g.times.front(), g.times.back());
            double xc[16];
            if (x.size() > 16)
                return false;
            for (std::size_t k = 0; k < x.size(); ++k)
                xc[k] = std::clamp(x[k], g.axes[k].front(), g.axes[k].back());
            return self->interpolate(tc, std::span<const double>(xc, x.size()), dx);
        },
        "tabulated field");
}

void TabulatedField::write(std::ostream& os) const
{
    const std::size_t n = dimension();
    os << "# flowatlas tabulated field\n";
    os << "n," << n << '\n';
    os << "axis,t";
    for (double v : grid_.times)
        os << ',' << format_double(v);
    os << '\n';
    for (std::size_t k = 0; k < n; ++k) {
        os << "axis,x" << (k + 1);
        for (double v : grid_.axes[k])
            os << ',' << format_double(v);
        os << '\n';
    }
    for (std::size_t s = 0; s < grid_.site_count(); ++s) {
        const auto c = site_coordinates(s);
        for (std::size_t i = 0; i < c.size(); ++i)
            os << (i ? "," : "") << format_double(c[i]);
        for (double v : site(s))
            os << ',' << format_double(v);
        os << '\n';
    }
}

TabulatedField TabulatedField::read(std::istream& is)
{
    std::string line;
    std::size_t n = 0;
    TabulationGrid grid;
    std::vector<double> values;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#')
            continue;
        const auto cells = split_csv(line);
        if (cells[0] == "n") {
            if (cells.size() != 2)
                throw std::runtime_error("tabulated field: malformed dimension line");
            n = static_cast<std::size_t>(parse_double(cells[1]));
            continue;
        }
        if (cells[0] == "axis") {
            if (cells.size() < 2)
                throw std::runtime_error("tabulated field: malformed axis line");
            std::vector<double> axis;
            for (std::size_t i = 2; i < cells.size(); ++i)
                axis.push_back(parse_double(cells[i]));
            if (cells[1] == "t")
                grid.times = std::move(axis);
            else
                grid.axes.push_back(std::move(axis));
            continue;
        }
        if (n == 0 || cells.size() != 2 * n + 1)
            throw std::runtime_error("tabulated field: row has " + std::to_string(cells.size()) + " cells, expected "
                                     + std::to_string(2 * n + 1));
        for (std::size_t i = n + 1; i < cells.size(); ++i)
            values.push_back(parse_double(cells[i]));
    }
    if (grid.axes.size() != n)
        throw std::runtime_error("tabulated field: axis count does not match n");
    return TabulatedField(std::move(grid), std::move(values));
}

TabulatedField tabulate_field(const FlowFamily& fam, const ReconstructionConfig& cfg)
{
    cfg.grid.validate();
    if (cfg.grid.dimension() != fam.dimension())
        throw std::invalid_argument("tabulate_field: grid dimension does not match the family");
    if (!(cfg.h > 0.0))
        throw std::invalid_argument("tabulate_field: h must be positive");
    const std::size_t n = fam.dimension();
    const std::size_t sites = cfg.grid.site_count();
    TabulatedField shape(cfg.grid, std::vector<double>(sites * n, 0.0));

    const auto per_site = map_indices<State>(cfg.exec, sites, [&](std::size_t s) {
        const auto c = shape.site_coordinates(s);
        const double tau = c[0];
        const std::span<const double> a(c.data() + 1, n);
        auto est = estimate_field(fam, tau, a, cfg.h, cfg.richardson);
        if (!est)
            return State(n, kNaN);
        if (cfg.smoothness_gate) {
            // Second tau-difference of F_{tau + k h, tau}(a), k = -1, 0, 1.
            const auto plus = fam.evaluate(tau + cfg.h, tau, a);
            const auto minus = fam.evaluate(tau - cfg.h, tau, a);
            if (!plus || !minus)
                return State(n, kNaN);
            for (std::size_t i = 0; i < n; ++i) {
                const double second = ((*plus)[i] - 2.0 * a[i] + (*minus)[i]) / (cfg.h * cfg.h);
                if (!(std::fabs(second) <= *cfg.smoothness_gate))
                    return State(n, kNaN);
            }
        }
        return std::move(est).value();
    });

    std::vector<double> values;
    values.reserve(sites * n);
    std::size_t skipped = 0;
    for (const auto& v : per_site) {
        if (std::isnan(v[0]))
            ++skipped;
        values.insert(values.end(), v.begin(), v.end());
    }
    if (2 * skipped > sites)
        throw ReconstructionFailed("field reconstruction skipped " + std::to_string(skipped) + " of "
                                   + std::to_string(sites) + " grid sites");
    return TabulatedField(cfg.grid, std::move(values));
}

VectorField field_from_family(const FlowFamily& fam, const ReconstructionConfig& cfg)
{
    return tabulate_field(fam, cfg).as_field();
}

RoundtripResult roundtrip(const FlowFamily& fam, const ReconstructionConfig& cfg, const IntegratorConfig& icfg,
                          const SamplePlan& check, const SampleGuard& guard)
{
    check.validate(fam.dimension());
    const FlowFamily rebuilt = numeric_family(field_from_family(fam, cfg), icfg);
    const auto samples = plan_triples(check);
    struct Outcome
    {
        int status = 0; // 0 skipped, 1 compared, 2 rebuilt flow failed
        double error = 0.0;
    };
    const auto outcomes = map_indices<Outcome>(cfg.exec, samples.size(), [&](std::size_t i) {
        const auto& s = samples[i];
        if (guard && !guard(s.t1, s.t2, s.a))
            return Outcome{};
        const auto original = fam.evaluate(s.t1, s.t2, s.a);
        if (!original)
            return Outcome{};
        const auto again = rebuilt.evaluate(s.t1, s.t2, s.a);
        if (!again)
            return Outcome{2, kInf};
        return Outcome{1, max_abs_diff(*again, *original)};
    });
    RoundtripResult r;
    std::optional<std::size_t> worst;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const auto& o = outcomes[i];
        if (o.status == 0)
            continue;
        if (o.status == 2)
            ++r.failed;
        else
            ++r.checked;
        if (!worst || o.error > r.max_error) {
            r.max_error = o.error;
            worst = i;
        }
    }
    if (worst)
        r.worst_case = SamplePoint{samples[*worst].t1, samples[*worst].t2, std::nullopt, samples[*worst].a};
    return r;
}

double roundtrip_error(const FlowFamily& fam, const ReconstructionConfig& cfg, const IntegratorConfig& icfg,
                       const SamplePlan& check, const SampleGuard& guard)
{
    const auto r = roundtrip(fam, cfg, icfg, check, guard);
    return r.failed > 0 ? kInf : r.max_error;
}

} // namespace flowatlas
