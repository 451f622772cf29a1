#include "flowatlas/cli.hpp"

#include <cmath>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "flowatlas/autonomous.hpp"
#include "flowatlas/config.hpp"
#include "flowatlas/integrate.hpp"
#include "flowatlas/linear.hpp"
#include "flowatlas/reconstruct.hpp"
#include "flowatlas/report.hpp"
#include "flowatlas/verify.hpp"

namespace flowatlas {

namespace {

struct Options
{
    std::string command;
    std::string config;
    std::optional<double> tau, sigma, rho;
    std::vector<double> a;
    std::string out;
    std::optional<std::uint64_t> seed;
    bool no_timestamp = false;
    bool numeric = false;
    bool serial = false;
    std::string export_path;
    std::optional<double> eps;
    std::optional<std::size_t> panels;
    std::optional<double> tau0;
    std::vector<double> alphas;
};

// Exit code carrier for failures detected while running a command.
struct CommandError
{
    int code;
    std::string error;
    std::string message;
};

class Context
{
public:
    Context(const Options& opt, RunSpec spec, ReportWriter& w) : opt_(opt), spec_(std::move(spec)), w_(w) {}

    int run();

private:
    Execution exec() const { return opt_.serial ? Execution::serial : Execution::parallel; }

    // Closed form when configured, otherwise the integrator-backed family.
    FlowFamily family() const
    {
        if (spec_.family && !(opt_.numeric && spec_.field))
            return *spec_.family;
        if (!spec_.field)
            throw CommandError{2, "config", "no family or field available"};
        return numeric_family(*spec_.field, spec_.integrator);
    }

    State state_arg() const
    {
        if (opt_.a.size() != spec_.n)
            throw CommandError{2, "usage",
                               "--a needs " + std::to_string(spec_.n) + " component(s), got "
                                   + std::to_string(opt_.a.size())};
        return opt_.a;
    }

    double time_arg(const std::optional<double>& v, const char* name) const
    {
        if (!v)
            throw CommandError{2, "usage", std::string("--") + name + " is required"};
        return *v;
    }

    bool emit(const ConditionReport& c)
    {
        w_.write(condition_record(c));
        return c.pass;
    }

    void summary(bool pass, Record extra = Record::object())
    {
        Record r;
        r["kind"] = "summary";
        r["command"] = opt_.command;
        for (auto& [k, v] : extra.items())
            r[k] = v;
        r["pass"] = pass;
        w_.write(r);
    }

    int flow();
    int interval();
    int verify();
    int reconstruct();
    int autonomous();
    int decompose();
    int mollify();

    // Shift so that 0 lies inside the family's time range; recorded in the report.
    FlowFamily recentred(const FlowFamily& fam)
    {
        const auto& range = fam.time_range();
        if (!range || range->contains(0.0))
            return fam;
        double shift = 0.0;
        if (std::isfinite(range->lo) && std::isfinite(range->hi))
            shift = 0.5 * (range->lo + range->hi);
        else if (std::isfinite(range->lo))
            shift = range->lo + 1.0;
        else
            shift = range->hi - 1.0;
        Record r;
        r["kind"] = "note";
        r["message"] = "time re-centred for the reduction";
        r["shift"] = json_number(shift);
        w_.write(r);
        return shifted_family(fam, shift);
    }

    const Options& opt_;
    RunSpec spec_;
    ReportWriter& w_;
};

int Context::run()
{
    if (opt_.command == "flow")
        return flow();
    if (opt_.command == "interval")
        return interval();
    if (opt_.command == "verify")
        return verify();
    if (opt_.command == "reconstruct")
        return reconstruct();
    if (opt_.command == "autonomous")
        return autonomous();
    if (opt_.command == "decompose")
        return decompose();
    return mollify();
}

int Context::flow()
{
    const double tau = time_arg(opt_.tau, "tau");
    const double sigma = time_arg(opt_.sigma, "sigma");
    const State a = state_arg();
    const auto fam = family();
    auto v = fam.evaluate(tau, sigma, a);
    if (!v) {
        const auto& dv = v.error();
        Record r = error_record(to_string(dv.kind), "F(" + std::to_string(tau) + ", " + std::to_string(sigma)
                                                        + ") is not defined at the given state");
        if (dv.escape) {
            r["escape"] = to_string(*dv.escape);
            r["escape_time"] = json_number(dv.escape_time);
        }
        w_.write(r);
        return 1;
    }
    w_.write(value_record(*v));
    return 0;
}

int Context::interval()
{
    const double rho = time_arg(opt_.rho, "rho");
    const State a = state_arg();
    EscapeInterval j;
    if (spec_.field) {
        j = escape_interval(*spec_.field, rho, a, spec_.integrator);
    } else {
        const auto fam = family();
        if (!fam.in_domain(rho, rho, a)) {
            w_.write(error_record("out_of_domain", "(rho, a) is outside the family's state space"));
            return 1;
        }
        j = scan_interval(fam, rho, a, {spec_.integrator.window_lo, spec_.integrator.window_hi});
    }
    if (!(j.lower < j.upper)) {
        w_.write(error_record("out_of_domain", "(rho, a) is outside the domain of the field"));
        return 1;
    }
    w_.write(interval_record(j));
    return 0;
}

int Context::verify()
{
    const auto fam = family();
    const auto report = run_suite(fam, spec_.plan, spec_.tolerances.suite_for(fam.kind()), exec());
    for (const auto& c : report.conditions)
        emit(c);
    Record extra;
    extra["family_kind"] = to_string(fam.kind());
    Record notes = Record::array();
    for (const auto& n : report.notes)
        notes.push_back(n);
    extra["notes"] = notes;
    summary(report.pass, extra);
    return report.pass ? 0 : 1;
}

int Context::reconstruct()
{
    const auto fam = family();
    ReconstructionConfig rcfg;
    rcfg.h = spec_.fd_step;
    rcfg.richardson = spec_.richardson;
    rcfg.grid = spec_.tabulation ? *spec_.tabulation : TabulationGrid::from_plan(spec_.plan);
    rcfg.exec = exec();

    TabulatedField tab = [&] {
        try {
            return tabulate_field(fam, rcfg);
        } catch (const ReconstructionFailed& e) {
            throw CommandError{1, "reconstruction_failed", e.what()};
        }
    }();

    if (!opt_.export_path.empty()) {
        std::ofstream os(opt_.export_path);
        if (!os)
            throw CommandError{2, "io", "cannot write " + opt_.export_path};
        tab.write(os);
    }

    Record info;
    info["kind"] = "tabulation";
    info["sites"] = tab.grid().site_count();
    info["skipped"] = tab.skipped_sites();
    if (!opt_.export_path.empty())
        info["export"] = opt_.export_path;
    w_.write(info);

    bool pass = true;
    if (spec_.field) {
        ConditionReport c;
        c.name = "reference_field";
        c.tolerance = spec_.tolerances.reference_field;
        const std::size_t sites = tab.grid().site_count();
        for (std::size_t i = 0; i < sites; ++i) {
            const auto site = tab.site(i);
            if (std::isnan(site[0])) {
                ++c.samples_skipped;
                continue;
            }
            const auto coords = tab.site_coordinates(i);
            const std::span<const double> x(coords.data() + 1, coords.size() - 1);
            auto ref = spec_.field->evaluate(coords[0], x);
            if (!ref) {
                ++c.samples_skipped;
                continue;
            }
            ++c.samples_checked;
            const double d = max_abs_diff(site, *ref);
            if (!c.worst_case || d > c.max_residual) {
                c.max_residual = d;
                c.worst_case = SamplePoint{coords[0], std::nullopt, std::nullopt, State(x.begin(), x.end())};
            }
        }
        c.pass = c.samples_checked > 0 && c.max_residual <= c.tolerance;
        pass = emit(c) && pass;
    }

    if (spec_.roundtrip) {
        // Compare only where both ends of the original map lie in the tabulated box.
        const auto& grid = rcfg.grid;
        auto in_box = [&](std::span<const double> x) {
            for (std::size_t i = 0; i < x.size(); ++i)
                if (x[i] < grid.axes[i].front() || x[i] > grid.axes[i].back())
                    return false;
            return true;
        };
        SampleGuard guard = [&](double tau, double sigma, std::span<const double> a) {
            if (tau < grid.times.front() || tau > grid.times.back() || sigma < grid.times.front()
                || sigma > grid.times.back() || !in_box(a))
                return false;
            auto v = fam.evaluate(tau, sigma, a);
            return v.has_value() && in_box(*v);
        };
        const auto rt = roundtrip(fam, rcfg, spec_.integrator, spec_.plan, guard);
        ConditionReport c;
        c.name = "roundtrip";
        c.tolerance = spec_.tolerances.roundtrip;
        c.samples_checked = rt.checked;
        c.max_residual = rt.failed > 0 ? kInf : rt.max_error;
        c.worst_case = rt.worst_case;
        c.pass = rt.checked > 0 && c.max_residual <= c.tolerance;
        if (rt.failed > 0)
            c.note = std::to_string(rt.failed) + " sample(s) escaped under the rebuilt field";
        pass = emit(c) && pass;
    }
    summary(pass);
    return pass ? 0 : 1;
}

int Context::autonomous()
{
    const auto fam = recentred(family());
    const double tol = spec_.tolerances.autonomy;
    const auto report = autonomy_report(fam, spec_.plan, tol, exec());
    emit(report);
    Record extra;
    extra["autonomous"] = report.pass;
    if (!report.pass) {
        summary(false, extra);
        return 1;
    }
    const auto g = to_group(fam, spec_.plan, tol);
    const auto law = check_group_law(g, spec_.plan, spec_.tolerances.group_law, exec());
    emit(law);
    summary(law.pass, extra);
    return law.pass ? 0 : 1;
}

Record matrix_json(const Eigen::MatrixXd& m)
{
    Record rows = Record::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Record row = Record::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            row.push_back(json_number(m(i, j)));
        rows.push_back(row);
    }
    return rows;
}

Record vector_json(const Eigen::VectorXd& v)
{
    return json_state(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

int Context::decompose()
{
    const auto fam = family();
    const double tau0 = opt_.tau0.value_or(spec_.tau0);
    SincovDecomposition dec;
    try {
        dec = sincov_decompose(fam, tau0, spec_.decompose_grid);
    } catch (const SingularWronskian& e) {
        throw CommandError{1, "singular_wronskian", e.what()};
    } catch (const NotAffine& e) {
        throw CommandError{1, "not_affine", e.what()};
    }
    if (!opt_.export_path.empty()) {
        std::ofstream os(opt_.export_path);
        if (!os)
            throw CommandError{2, "io", "cannot write " + opt_.export_path};
        dec.write(os);
    }
    for (std::size_t k = 0; k < dec.grid.size(); ++k) {
        Record r;
        r["kind"] = "wronskian";
        r["tau"] = json_number(dec.grid[k]);
        r["W"] = matrix_json(dec.W[k]);
        r["h"] = vector_json(dec.h[k]);
        r["particular"] = vector_json(dec.W[k] * dec.h[k]);
        w_.write(r);
    }
    bool pass = true;
    if (spec_.field && dec.grid.size() >= 3) {
        try {
            pass = emit(wronski_consistency(dec, *spec_.field, spec_.tolerances.wronski));
        } catch (const NotAffineField& e) {
            throw CommandError{1, "not_affine", e.what()};
        }
    }
    Record extra;
    extra["tau0"] = json_number(tau0);
    summary(pass, extra);
    return pass ? 0 : 1;
}

int Context::mollify()
{
    const auto fam = recentred(family());
    const OneParamGroup g = [&] {
        try {
            return to_group(fam, spec_.plan, spec_.tolerances.autonomy);
        } catch (const NotAutonomous& e) {
            throw CommandError{1, "not_autonomous", e.what()};
        }
    }();
    const double eps = opt_.eps.value_or(spec_.epsilon);
    const std::size_t panels = opt_.panels.value_or(spec_.panels);
    if (panels < 2 || panels % 2 != 0)
        throw CommandError{2, "usage", "--panels must be even and at least 2"};
    Mollifier m;
    try {
        m = flowatlas::mollify(g, eps, panels);
    } catch (const NotInvertible& e) {
        throw CommandError{1, "not_invertible", e.what()};
    } catch (const NotAffine& e) {
        throw CommandError{1, "not_affine", e.what()};
    }
    Record r;
    r["kind"] = "mollifier";
    r["epsilon"] = json_number(m.epsilon);
    r["panels"] = m.panels;
    r["A"] = matrix_json(m.H.A);
    r["b"] = vector_json(m.H.b);
    r["smallest_singular_value"] = json_number(m.smallest_singular_value);
    r["distance_to_identity"] = json_number(m.H.distance(AffineMap::identity(spec_.n)));
    w_.write(r);

    ConditionReport c;
    c.name = "smoothing";
    c.tolerance = spec_.tolerances.smoothing;
    const auto& alphas = opt_.alphas.empty() ? spec_.alphas : opt_.alphas;
    for (double alpha : alphas) {
        double d = kInf;
        try {
            d = smooth_apply(g, m, alpha).distance(group_affine(g, alpha));
        } catch (const NotAffine&) {
            ++c.samples_skipped;
            continue;
        }
        ++c.samples_checked;
        if (!(d <= c.max_residual)) {
            c.max_residual = std::isnan(d) ? kInf : d;
            c.worst_case = SamplePoint{std::nullopt, std::nullopt, alpha, State(spec_.n, 0.0)};
        }
    }
    c.pass = c.samples_checked > 0 && c.max_residual <= c.tolerance;
    emit(c);
    summary(c.pass);
    return c.pass ? 0 : 1;
}

void add_common(CLI::App* sub, Options& o)
{
    sub->add_option("--config", o.config, "JSON run configuration")->required();
    sub->add_option("--out", o.out, "write the report to this file instead of stdout");
    sub->add_option("--seed", o.seed, "override the plan seed");
    sub->add_flag("--no-timestamp", o.no_timestamp, "omit the timestamp from the run header");
    sub->add_flag("--numeric", o.numeric, "integrate the field even when a closed-form family is configured");
    sub->add_flag("--serial", o.serial, "disable the parallel kernels");
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    Options o;
    CLI::App app{"flowatlas: flow families of ordinary differential equations", "flowatlas"};
    app.require_subcommand(1);

    auto* flow = app.add_subcommand("flow", "evaluate F_{tau sigma}(a)");
    add_common(flow, o);
    flow->add_option("--tau", o.tau)->required();
    flow->add_option("--sigma", o.sigma)->required();
    flow->add_option("--a", o.a)->delimiter(',')->required();

    auto* interval = app.add_subcommand("interval", "existence interval J(rho, a)");
    add_common(interval, o);
    interval->add_option("--rho", o.rho)->required();
    interval->add_option("--a", o.a)->delimiter(',')->required();

    auto* verify = app.add_subcommand("verify", "sampled flow-family conditions");
    add_common(verify, o);

    auto* reconstruct = app.add_subcommand("reconstruct", "recover and tabulate the vector field");
    add_common(reconstruct, o);
    reconstruct->add_option("--export", o.export_path, "write the tabulated field here");

    auto* autonomous = app.add_subcommand("autonomous", "time-translation invariance and group law");
    add_common(autonomous, o);

    auto* decompose = app.add_subcommand("decompose", "Wronski matrix and particular solution of an affine family");
    add_common(decompose, o);
    decompose->add_option("--tau0", o.tau0);
    decompose->add_option("--export", o.export_path, "write the decomposition grid here");

    auto* mollify = app.add_subcommand("mollify", "mollified affine group average");
    add_common(mollify, o);
    mollify->add_option("--eps", o.eps);
    mollify->add_option("--panels", o.panels);
    mollify->add_option("--alpha", o.alphas)->delimiter(',');

    std::vector<const char*> argv{"flowatlas"};
    for (const auto& a : args)
        argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "flowatlas: " << e.what() << '\n';
        out << error_record("usage", e.what()).dump() << '\n';
        return 2;
    }
    for (auto* sub : app.get_subcommands())
        o.command = sub->get_name();

    std::ofstream file;
    std::ostream* os = &out;
    if (!o.out.empty()) {
        file.open(o.out);
        if (!file) {
            err << "flowatlas: cannot write " << o.out << '\n';
            out << error_record("io", "cannot write " + o.out).dump() << '\n';
            return 2;
        }
        os = &file;
    }
    ReportWriter w(*os, !o.no_timestamp);

    RunSpec spec;
    try {
        spec = load_config(o.config);
        if (o.seed)
            spec.plan.seed = *o.seed;
    } catch (const ConfigError& e) {
        err << "flowatlas: " << e.what() << '\n';
        Record r = error_record("config", e.message());
        r["path"] = e.path();
        r["field"] = e.field();
        w.write(r);
        return 2;
    }

    w.header(o.command, spec.source, spec.plan.seed);
    try {
        Context ctx(o, std::move(spec), w);
        return ctx.run();
    } catch (const CommandError& e) {
        err << "flowatlas: " << e.message << '\n';
        w.write(error_record(e.error, e.message));
        return e.code;
    } catch (const std::exception& e) {
        err << "flowatlas: " << e.what() << '\n';
        w.write(error_record("internal", e.what()));
        return 1;
    }
}

} // namespace flowatlas
