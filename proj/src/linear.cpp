#include "flowatlas/linear.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace flowatlas {

namespace {

Eigen::VectorXd to_vec(std::span<const double> a)
{
    return Eigen::Map<const Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
}

State to_state(const Eigen::VectorXd& v) { return State(v.data(), v.data() + v.size()); }

// Probe vector used for affinity spot checks.
State probe_vector(std::size_t n)
{
    State v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = (i % 2 == 0 ? 0.5 : -0.3) + 0.1 * static_cast<double>(i);
    return v;
}

double max_entry(const Eigen::MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::vector<double> parse_row(const std::string& line)
{
    std::vector<double> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        double v = 0.0;
        const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
            throw std::runtime_error("decomposition: bad number '" + cell + "'");
        out.push_back(v);
    }
    return out;
}

// Segment index and weight for entrywise interpolation on a sorted grid.
std::pair<std::size_t, double> segment(const std::vector<double>& grid, double tau)
{
    if (grid.size() == 1)
        return {0, 0.0};
    auto it = std::upper_bound(grid.begin(), grid.end(), tau);
    std::size_t hi = static_cast<std::size_t>(it - grid.begin());
    hi = std::clamp<std::size_t>(hi, 1, grid.size() - 1);
    const std::size_t lo = hi - 1;
    return {lo, (tau - grid[lo]) / (grid[hi] - grid[lo])};
}

// Composite Simpson average of maps(beta) over [lo, hi].
AffineMap simpson_average(const std::function<AffineMap(double)>& maps, double lo, double hi, std::size_t panels,
                          std::size_t n)
{
    AffineMap sum{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)),
                  Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))};
    const double step = (hi - lo) / static_cast<double>(panels);
    for (std::size_t i = 0; i <= panels; ++i) {
        const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        const AffineMap m = maps(lo + step * static_cast<double>(i));
        sum.A += w * m.A;
        sum.b += w * m.b;
    }
    const double scale = step / 3.0 / (hi - lo);
    sum.A *= scale;
    sum.b *= scale;
    return sum;
}

} // namespace

AffineMap AffineMap::identity(std::size_t n)
{
    const auto k = static_cast<Eigen::Index>(n);
    return {Eigen::MatrixXd::Identity(k, k), Eigen::VectorXd::Zero(k)};
}

State AffineMap::apply(std::span<const double> a) const { return to_state(A * to_vec(a) + b); }

AffineMap AffineMap::compose(const AffineMap& other) const { return {A * other.A, A * other.b + b}; }

double AffineMap::smallest_singular_value() const
{
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    return svd.singularValues().minCoeff();
}

bool AffineMap::invertible() const
{
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    const auto& s = svd.singularValues();
    return s.maxCoeff() > 0.0 && s.minCoeff() > kSingularRatio * s.maxCoeff();
}

AffineMap AffineMap::inverse() const
{
    if (!invertible())
        throw NotInvertible("affine map is not invertible", smallest_singular_value());
    Eigen::MatrixXd inv = A.inverse();
    return {inv, -inv * b};
}

double AffineMap::distance(const AffineMap& other) const
{
    return std::max(max_entry(A - other.A), max_entry(b - other.b));
}

AffineMap extract_affine(const std::function<Expected<State, DomainViolation>(std::span<const double>)>& map,
                         std::size_t n)
{
    const State zero(n, 0.0);
    const auto at_zero = map(zero);
    if (!at_zero)
        throw NotAffine("affine probe at 0 is outside the domain");
    AffineMap m = AffineMap::identity(n);
    m.b = to_vec(*at_zero);
    for (std::size_t k = 0; k < n; ++k) {
        State e(n, 0.0);
        e[k] = 1.0;
        const auto v = map(e);
        if (!v)
            throw NotAffine("affine probe at e" + std::to_string(k + 1) + " is outside the domain");
        m.A.col(static_cast<Eigen::Index>(k)) = to_vec(*v) - m.b;
    }
    return m;
}

ConditionReport affinity_report(const FlowFamily& fam, const SamplePlan& plan, double tol, Execution exec)
{
    plan.validate(fam.dimension());
    ConditionReport report{"affinity"};
    report.tolerance = tol;
    const auto& times = plan.time_grid;
    const auto& states = plan.state_grid;
    const std::size_t m = states.size();
    static constexpr double kLambdas[] = {-1.0, 0.5, 2.0};
    struct Sample
    {
        double tau, sigma;
        std::size_t ia, ib;
        double lambda;
    };
    std::vector<Sample> samples;
    for (double tau : times)
        for (double sigma : times)
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j : {(i + 1) % m, (i + m / 2) % m}) {
                    if (j == i)
                        continue;
                    for (double lambda : kLambdas)
                        samples.push_back({tau, sigma, i, j, lambda});
                }
    const auto outcomes = map_indices<SampleOutcome>(exec, samples.size(), [&](std::size_t k) {
        const auto& s = samples[k];
        const State& a = states[s.ia];
        const State& b = states[s.ib];
        State mix(a.size());
        for (std::size_t i = 0; i < a.size(); ++i)
            mix[i] = s.lambda * a[i] + (1.0 - s.lambda) * b[i];
        const auto fa = fam.evaluate(s.tau, s.sigma, a);
        const auto fb = fam.evaluate(s.tau, s.sigma, b);
        const auto fm = fam.evaluate(s.tau, s.sigma, mix);
        if (!fa || !fb || !fm)
            return SampleOutcome{};
        State combo(a.size());
        for (std::size_t i = 0; i < a.size(); ++i)
            combo[i] = s.lambda * (*fa)[i] + (1.0 - s.lambda) * (*fb)[i];
        return SampleOutcome{true, max_abs_diff(*fm, combo)};
    });
    reduce_outcomes(outcomes, report, [&](std::size_t k) {
        const auto& s = samples[k];
        return SamplePoint{s.tau, s.sigma, std::nullopt, states[s.ia]};
    });
    report.pass = report.max_residual <= tol && report.samples_checked > 0;
    return report;
}

bool detect_affine(const FlowFamily& fam, const SamplePlan& plan, double tol, Execution exec)
{
    return affinity_report(fam, plan, tol, exec).pass;
}

Eigen::MatrixXd SincovDecomposition::W_at(double tau) const
{
    const auto [i, w] = segment(grid, tau);
    if (grid.size() == 1)
        return W[0];
    return (1.0 - w) * W[i] + w * W[i + 1];
}

Eigen::VectorXd SincovDecomposition::h_at(double tau) const
{
    const auto [i, w] = segment(grid, tau);
    if (grid.size() == 1)
        return h[0];
    return (1.0 - w) * h[i] + w * h[i + 1];
}

void SincovDecomposition::write(std::ostream& os) const
{
    const std::size_t n = dimension();
    os << "# flowatlas sincov decomposition: tau, W row-major, h\n";
    os << "n," << n << '\n';
    os << "tau0," << format_double(tau0) << '\n';
    for (std::size_t k = 0; k < grid.size(); ++k) {
        os << format_double(grid[k]);
        for (Eigen::Index r = 0; r < W[k].rows(); ++r)
            for (Eigen::Index c = 0; c < W[k].cols(); ++c)
                os << ',' << format_double(W[k](r, c));
        for (Eigen::Index r = 0; r < h[k].size(); ++r)
            os << ',' << format_double(h[k](r));
        os << '\n';
    }
}

SincovDecomposition SincovDecomposition::read(std::istream& is, bool enforce_time_domain)
{
    SincovDecomposition dec;
    dec.enforce_time_domain = enforce_time_domain;
    std::size_t n = 0;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#')
            continue;
        if (line.rfind("n,", 0) == 0) {
            n = static_cast<std::size_t>(std::stoul(line.substr(2)));
            continue;
        }
        if (line.rfind("tau0,", 0) == 0) {
            dec.tau0 = parse_row(line.substr(5)).at(0);
            continue;
        }
        const auto row = parse_row(line);
        if (n == 0 || row.size() != 1 + n * n + n)
            throw std::runtime_error("decomposition: row has " + std::to_string(row.size()) + " cells, expected "
                                     + std::to_string(1 + n * n + n));
        const auto k = static_cast<Eigen::Index>(n);
        Eigen::MatrixXd W(k, k);
        Eigen::VectorXd h(k);
        for (Eigen::Index r = 0; r < k; ++r)
            for (Eigen::Index c = 0; c < k; ++c)
                W(r, c) = row[static_cast<std::size_t>(1 + r * k + c)];
        for (Eigen::Index r = 0; r < k; ++r)
            h(r) = row[static_cast<std::size_t>(1 + k * k + r)];
        if (!dec.grid.empty() && !(row[0] > dec.grid.back()))
            throw std::runtime_error("decomposition: grid times must be strictly increasing");
        dec.grid.push_back(row[0]);
        dec.W.push_back(std::move(W));
        dec.h.push_back(std::move(h));
    }
    if (dec.grid.empty())
        throw std::runtime_error("decomposition: no grid rows");
    return dec;
}

SincovDecomposition sincov_decompose(const FlowFamily& fam, double tau0, const std::vector<double>& grid,
                                     double affine_tol)
{
    if (grid.empty() || !std::is_sorted(grid.begin(), grid.end()))
        throw std::invalid_argument("sincov_decompose: grid must be nonempty and sorted");
    const std::size_t n = fam.dimension();

    // Affinity spot check on a thinned copy of the grid.
    SamplePlan plan;
    const std::size_t stride = std::max<std::size_t>(1, grid.size() / 6);
    for (std::size_t i = 0; i < grid.size(); i += stride)
        plan.time_grid.push_back(grid[i]);
    plan.time_grid.push_back(tau0);
    std::sort(plan.time_grid.begin(), plan.time_grid.end());
    plan.time_grid.erase(std::unique(plan.time_grid.begin(), plan.time_grid.end()), plan.time_grid.end());
    plan.state_grid.push_back(State(n, 0.0));
    for (std::size_t k = 0; k < n; ++k) {
        State e(n, 0.0);
        e[k] = 1.0;
        plan.state_grid.push_back(std::move(e));
    }
    plan.state_grid.push_back(probe_vector(n));
    const auto affinity = affinity_report(fam, plan, affine_tol);
    if (!affinity.pass)
        throw NotAffine("family is not affine in the state (residual " + std::to_string(affinity.max_residual) + ")");

    SincovDecomposition dec;
    dec.tau0 = tau0;
    dec.grid = grid;
    for (double tau : grid) {
        const AffineMap m =
            extract_affine([&](std::span<const double> a) { return fam.evaluate(tau, tau0, a); }, n);
        if (!m.invertible())
            throw SingularWronskian("Wronski matrix is singular at tau = " + format_double(tau),
                                    m.smallest_singular_value());
        dec.W.push_back(m.A);
        dec.h.push_back(m.A.colPivHouseholderQr().solve(m.b));
    }
    return dec;
}

FlowFamily family_from_decomposition(const SincovDecomposition& dec)
{
    if (dec.grid.empty() || dec.W.size() != dec.grid.size() || dec.h.size() != dec.grid.size())
        throw std::invalid_argument("family_from_decomposition: malformed decomposition");
    const std::size_t n = dec.dimension();
    auto in_span = [dec](double tau, double sigma) {
        if (!dec.enforce_time_domain)
            return true;
        const double lo = dec.grid.front(), hi = dec.grid.back();
        return tau >= lo && tau <= hi && sigma >= lo && sigma <= hi;
    };
    return FlowFamily(
        n, FamilyKind::affine_backed,
        [dec, in_span](double tau, double sigma, std::span<const double> a) -> Expected<State, DomainViolation> {
            if (!in_span(tau, sigma))
                return DomainViolation{};
            if (tau == sigma)
                return State(a.begin(), a.end());
            const Eigen::MatrixXd Ws = dec.W_at(sigma);
            const Eigen::VectorXd inner = Ws.partialPivLu().solve(to_vec(a)) + dec.h_at(tau) - dec.h_at(sigma);
            return to_state(dec.W_at(tau) * inner);
        },
        [in_span](double tau, double sigma, std::span<const double>) { return in_span(tau, sigma); });
}

ConditionReport wronski_consistency(const SincovDecomposition& dec, const VectorField& field, double tol)
{
    const std::size_t n = dec.dimension();
    if (field.dimension() != n)
        throw std::invalid_argument("wronski_consistency: dimension mismatch");
    ConditionReport report{"wronski_consistency"};
    report.tolerance = tol;

    auto coefficients = [&](double tau) {
        const AffineMap m = extract_affine(
            [&](std::span<const double> x) -> Expected<State, DomainViolation> {
                auto v = field.evaluate(tau, x);
                if (!v)
                    return DomainViolation{};
                return std::move(v).value();
            },
            n);
        const State v = probe_vector(n);
        const auto fv = field.evaluate(tau, v);
        if (!fv)
            throw NotAffineField("field undefined at the affinity probe");
        const State predicted = m.apply(v);
        if (max_abs_diff(*fv, predicted) > 1e-9 * (1.0 + max_abs(predicted)))
            throw NotAffineField("field is not affine in x at tau = " + format_double(tau));
        return m;
    };

    double worst = 0.0;
    std::optional<double> worst_tau;
    for (std::size_t i = 1; i + 1 < dec.grid.size(); ++i) {
        const double t = dec.grid[i];
        AffineMap coeff;
        try {
            coeff = coefficients(t);
        } catch (const NotAffine&) {
            throw NotAffineField("field undefined at an affine probe point");
        }
        const double dt = dec.grid[i + 1] - dec.grid[i - 1];
        const Eigen::MatrixXd dW = (dec.W[i + 1] - dec.W[i - 1]) / dt;
        const double r_w = max_entry(dW - coeff.A * dec.W[i]);
        const Eigen::VectorXd p_prev = dec.W[i - 1] * dec.h[i - 1];
        const Eigen::VectorXd p_next = dec.W[i + 1] * dec.h[i + 1];
        const Eigen::VectorXd p = dec.W[i] * dec.h[i];
        const double r_p = max_entry((p_next - p_prev) / dt - (coeff.A * p + coeff.b));
        const double r = std::max(r_w, r_p);
        ++report.samples_checked;
        if (!worst_tau || r > worst) {
            worst = r;
            worst_tau = t;
        }
    }
    report.max_residual = worst;
    if (worst_tau)
        report.worst_case = SamplePoint{*worst_tau, std::nullopt, std::nullopt, {}};
    report.pass = worst <= tol;
    return report;
}

AffineMap group_affine(const OneParamGroup& g, double alpha)
{
    const std::size_t n = g.dimension();
    const AffineMap m = extract_affine([&](std::span<const double> a) { return g.apply(alpha, a); }, n);
    const State v = probe_vector(n);
    const auto gv = g.apply(alpha, v);
    if (!gv)
        throw NotAffine("group map undefined at the affinity probe");
    const State predicted = m.apply(v);
    if (max_abs_diff(*gv, predicted) > 1e-9 * (1.0 + max_abs(predicted)))
        throw NotAffine("group map is not affine at alpha = " + format_double(alpha));
    return m;
}

Mollifier mollify(const OneParamGroup& g, double epsilon, std::size_t panels)
{
    if (!(epsilon > 0.0))
        throw std::invalid_argument("mollify: epsilon must be positive");
    if (panels < 2 || panels % 2 != 0)
        throw std::invalid_argument("mollify: panel count must be even and at least 2");
    Mollifier m;
    m.epsilon = epsilon;
    m.panels = panels;
    m.H = simpson_average([&](double beta) { return group_affine(g, beta); }, -epsilon, epsilon, panels,
                          g.dimension());
    m.smallest_singular_value = m.H.smallest_singular_value();
    m.quadrature_error_scale = std::pow(2.0 * epsilon, 5) / std::pow(static_cast<double>(panels), 4);
    // G_0 = id sets the scale: a uniformly tiny average (rotation by
    // eps = pi) is as singular as a rank-deficient one.
    if (!m.H.invertible() || m.smallest_singular_value <= kSingularRatio)
        throw NotInvertible("mollifier average is singular; reduce epsilon", m.smallest_singular_value);
    return m;
}

AffineMap smooth_apply(const OneParamGroup& g, const Mollifier& m, double alpha)
{
    const AffineMap avg = simpson_average([&](double gamma) { return group_affine(g, gamma); }, alpha - m.epsilon,
                                          alpha + m.epsilon, m.panels, g.dimension());
    return avg.compose(m.H.inverse());
}

OneParamGroup affine_group(std::size_t n, std::function<AffineMap(double)> maps)
{
    return OneParamGroup(n, [maps = std::move(maps)](double alpha,
                                                     std::span<const double> a) -> Expected<State, DomainViolation> {
        return maps(alpha).apply(a);
    });
}

} // namespace flowatlas
