// One line per acceptance criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include <unistd.h>

#include "corpus.hpp"
#include "families.hpp"
#include "flowatlas/autonomous.hpp"
#include "flowatlas/cli.hpp"
#include "flowatlas/integrate.hpp"
#include "flowatlas/linear.hpp"
#include "flowatlas/reconstruct.hpp"
#include "flowatlas/verify.hpp"

using namespace flowatlas;
using namespace fixtures;

namespace {

int failures = 0;

void report(int n, bool pass, const std::string& detail)
{
    std::printf("criterion %d: %s  %s\n", n, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!pass)
        ++failures;
}

std::string fmt(const char* f, double a = 0, double b = 0, double c = 0, double d = 0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

const std::vector<double> kTimes{-1.0, -0.5, 0.0, 0.5, 1.0, 1.5};
const std::vector<double> kStates{-1.0, -0.5, 0.0, 0.25, 0.5};

bool guard(double tau, double sigma, double a) { return (tau - sigma) * a < 0.9; }

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void criterion1()
{
    const auto t0 = std::chrono::steady_clock::now();
    const auto f = catalog_field(*find_catalog("riccati"));
    IntegratorConfig cfg;
    cfg.rel_tol = 1e-10;
    cfg.abs_tol = 1e-12;
    double worst = 0.0;
    std::size_t count = 0;
    bool all_ok = true;
    for (double tau : kTimes)
        for (double sigma : kTimes)
            for (double a : kStates) {
                if (!guard(tau, sigma, a))
                    continue;
                const State x{a};
                auto v = advance(f, sigma, x, tau, cfg);
                ++count;
                if (!v) {
                    all_ok = false;
                    continue;
                }
                worst = std::max(worst, std::abs(v->at(0) - a / (1.0 + (sigma - tau) * a)));
            }
    const double secs = seconds_since(t0);
    report(1, all_ok && worst <= 1e-8 && secs < 10.0,
           fmt("max |numeric - closed form| = %.3e over %.0f samples (<= 1e-8), %.3f s (< 10 s)", worst,
               static_cast<double>(count), secs));
}

void criterion2()
{
    const auto j = escape_interval(catalog_field(*find_catalog("riccati")), 0.0, State{0.5});
    const bool pass = std::abs(j.upper - 2.0) <= 1e-3 && j.upper_kind == EndpointKind::blow_up
                      && j.lower_kind == EndpointKind::window_limit;
    report(2, pass,
           "J(0, 0.5) = (" + fmt("%.6g", j.lower) + ", " + fmt("%.9f", j.upper) + "), lower " + to_string(j.lower_kind)
               + ", upper " + to_string(j.upper_kind));
}

void criterion3()
{
    const auto fam = riccati_closed();
    ReconstructionConfig cfg;
    cfg.h = 1e-4;
    cfg.richardson = true;
    cfg.grid = TabulationGrid::uniform(-1.25, 1.75, 13, {{-2.5, 2.5}}, 8001);
    const auto tab = tabulate_field(fam, cfg);
    double field_err = 0.0;
    for (std::size_t i = 0; i < tab.grid().site_count(); ++i) {
        const auto c = tab.site_coordinates(i);
        const double v = tab.site(i)[0];
        field_err = std::isnan(v) ? kInf : std::max(field_err, std::abs(v - c[1] * c[1]));
    }
    SamplePlan plan;
    plan.time_grid = kTimes;
    for (double a : kStates)
        plan.state_grid.push_back({a});
    IntegratorConfig icfg;
    const auto rt = roundtrip(fam, cfg, icfg, plan,
                              [](double tau, double sigma, std::span<const double> a) { return guard(tau, sigma, a[0]); });
    const double rt_err = rt.failed ? kInf : rt.max_error;
    report(3, field_err <= 1e-6 && rt_err <= 1e-5 && rt.checked > 0,
           fmt("field error %.3e over %.0f sites (<= 1e-6); roundtrip error %.3e over %.0f samples (<= 1e-5)",
               field_err, static_cast<double>(tab.grid().site_count()), rt_err, static_cast<double>(rt.checked)));
}

void criterion4()
{
    bool pass = true;
    std::string detail;
    for (const auto& entry : catalog()) {
        const auto fam = catalog_family(entry);
        const auto r = run_suite(fam, SamplePlan::default_for(entry.n), Tolerances::defaults_for(fam.kind()));
        pass = pass && r.pass;
        if (!r.pass)
            detail += entry.name + " failed; ";
    }
    detail += "catalog " + std::string(pass ? "passes" : "fails") + "; ";

    const auto plan = SamplePlan::default_for(1);
    struct Counter
    {
        const char* label;
        FlowFamily fam;
        const char* condition;
    };
    for (const auto& c : {Counter{"broken identity", broken_identity(), "identity"},
                          Counter{"non-bijective", constant_maps(), "inverse"},
                          Counter{"perturbed cocycle", perturbed_cocycle(), "cocycle"}}) {
        const auto r = run_suite(c.fam, plan, Tolerances{});
        const bool flagged = !r.pass && !r.condition(c.condition).pass;
        pass = pass && flagged;
        detail += std::string(c.label) + (flagged ? " flags " : " MISSES ") + c.condition + "; ";
    }

    SamplePlan random;
    random.time_grid = {-1.0, 1.5};
    random.state_grid = {{-1.0}, {0.5}};
    random.random_count = 1100;
    random.seed = 2024;
    const auto num = numeric_family(catalog_field(*find_catalog("riccati")));
    const auto co = check_cocycle(num, random, 1e-7);
    pass = pass && co.pass && co.samples_checked >= 1000;
    detail += fmt("numeric riccati cocycle residual %.3e over %.0f guarded triples (<= 1e-7)", co.max_residual,
                  static_cast<double>(co.samples_checked));
    report(4, pass, detail);
}

void criterion5()
{
    const double ln2 = std::log(2.0);
    const auto field = catalog_field(*find_catalog("affine_scalar"));
    const auto num = numeric_family(field);
    const auto dec = sincov_decompose(num, 0.0, {0.0, ln2, 1.0});
    const double w = dec.W_at(ln2)(0, 0);
    const double p = dec.particular(ln2)(0);

    std::vector<double> grid;
    for (int i = 0; i <= 200; ++i)
        grid.push_back(-1.0 + 0.01 * i);
    const auto closed = catalog_family(*find_catalog("affine_scalar"));
    const auto f0 = family_from_decomposition(sincov_decompose(closed, 0.0, grid));
    const auto f1 = family_from_decomposition(sincov_decompose(closed, 1.0, grid));
    double gauge = 0.0;
    for (std::size_t i = 0; i < grid.size(); i += 10)
        for (std::size_t j = 0; j < grid.size(); j += 10)
            for (double a : {-1.0, 0.0, 0.5, 2.0}) {
                const State x{a};
                const auto u = f0.evaluate(grid[i], grid[j], x);
                const auto v = f1.evaluate(grid[i], grid[j], x);
                gauge = (u && v) ? std::max(gauge, max_abs_diff(*u, *v)) : kInf;
            }

    const auto wr = wronski_consistency(sincov_decompose(num, 0.0, grid), field, 1e-3);
    const bool pass = std::abs(w - 2.0) <= 1e-8 && std::abs(p - 1.0) <= 1e-8 && gauge <= 1e-10 && wr.pass;
    report(5, pass,
           fmt("W(ln 2) = %.12f, p(ln 2) = %.12f, gauge difference %.3e (<= 1e-10), ", w, p, gauge)
               + fmt("Wronski residual %.3e (<= 1e-3)", wr.max_residual));
}

void criterion6()
{
    const auto rotation = [](double b) {
        AffineMap m = AffineMap::identity(2);
        m.A << std::cos(b), -std::sin(b), std::sin(b), std::cos(b);
        return m;
    };
    const auto g = affine_group(2, rotation);
    const auto m = mollify(g, std::numbers::pi / 2, 256);
    AffineMap target = AffineMap::identity(2);
    target.A *= 2.0 / std::numbers::pi;
    const double h_err = m.H.distance(target);

    const auto m25 = mollify(g, 0.25, 256);
    double smooth = 0.0;
    for (double alpha : {-1.0, -0.3, 0.0, 0.3, 1.0})
        smooth = std::max(smooth, smooth_apply(g, m25, alpha).distance(rotation(alpha)));

    bool monotone = true;
    double prev = kInf;
    std::string seq;
    for (double eps : {0.4, 0.2, 0.1, 0.05}) {
        const double d = mollify(g, eps, 256).H.distance(AffineMap::identity(2));
        monotone = monotone && d < prev;
        prev = d;
        seq += fmt(" %.3e", d);
    }
    report(6, h_err <= 1e-10 && smooth <= 1e-8 && monotone,
           fmt("|H - (2/pi) I| = %.3e (<= 1e-10), smoothing error %.3e (<= 1e-8), |H - id| over eps 0.4..0.05:", h_err,
               smooth)
               + seq);
}

void criterion7()
{
    const auto plan = SamplePlan::default_for(1);
    const bool ric = detect_autonomous(riccati_closed(), plan, 1e-9);
    const bool ex = detect_autonomous(catalog_family(*find_catalog("exp_scalar")), plan, 1e-9);
    const bool rot = detect_autonomous(catalog_family(*find_catalog("rotation")), SamplePlan::default_for(2), 1e-9);
    const bool shear = detect_autonomous(catalog_family(*find_catalog("shear")), plan, 1e-9);

    const auto g = to_group(riccati_closed(), plan, 1e-9);
    SamplePlan triples;
    triples.time_grid = {-1.0, 1.0};
    triples.state_grid = {{-1.0}, {0.5}};
    triples.random_count = 500;
    triples.seed = 7;
    const auto law = check_group_law(g, triples, 1e-7);

    const auto half = g.apply(0.5, State{0.5});
    const auto twice = half ? g.apply(0.5, *half) : half;
    const auto once = g.apply(1.0, State{0.5});
    const bool worked = twice && once && std::abs(twice->at(0) - 1.0) <= 1e-12 && std::abs(once->at(0) - 1.0) <= 1e-12;

    report(7, ric && ex && rot && !shear && law.pass && worked,
           std::string("autonomous: riccati ") + (ric ? "yes" : "no") + ", exp_scalar " + (ex ? "yes" : "no")
               + ", rotation " + (rot ? "yes" : "no") + ", shear " + (shear ? "yes" : "no")
               + fmt("; group law residual %.3e over %.0f triples (<= 1e-7)", law.max_residual,
                     static_cast<double>(law.samples_checked))
               + (worked ? "; G_0.5(G_0.5(0.5)) = G_1(0.5) = 1" : "; worked values differ"));
}

void criterion8()
{
    std::size_t ok = 0;
    for (const auto& c : kGoldenCorpus) {
        auto e = expr::parse(c.source);
        if (!e)
            continue;
        auto again = expr::parse(expr::pretty_print(*e));
        if (again && *again == *e)
            ++ok;
    }
    std::size_t errors_ok = 0;
    for (const auto& c : kParseErrors) {
        auto e = expr::parse(c.source);
        if (!e && e.error().offset == c.offset && e.error().message.rfind(std::string(c.message_prefix), 0) == 0)
            ++errors_ok;
    }
    report(8, kGoldenCorpus.size() >= 30 && ok == kGoldenCorpus.size() && errors_ok == kParseErrors.size(),
           fmt("%.0f/%.0f corpus expressions round-trip, %.0f/%.0f error offsets match", static_cast<double>(ok),
               static_cast<double>(kGoldenCorpus.size()), static_cast<double>(errors_ok),
               static_cast<double>(kParseErrors.size())));
}

void criterion9()
{
    const auto dir = std::filesystem::temp_directory_path() / ("flowatlas_accept_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    const auto cfg = (dir / "riccati_field.json").string();
    std::ofstream(cfg) << R"({"system": {"field": {"n": 1, "rhs": ["x1^2"]}}})";
    auto once = [&] {
        std::ostringstream out, err;
        const int code = run_cli({"verify", "--config", cfg, "--seed", "99", "--no-timestamp"}, out, err);
        return std::make_pair(code, out.str());
    };
    const auto a = once();
    const auto b = once();
    std::filesystem::remove_all(dir);
    report(9, a.first == 0 && a == b && !a.second.empty(),
           fmt("two verify runs: exit %.0f / %.0f, ", a.first, b.first) + std::to_string(a.second.size()) + " bytes, "
               + (a.second == b.second ? "identical" : "DIFFERENT"));
}

template <class Fn>
void guarded(int n, Fn fn)
{
    try {
        fn();
    } catch (const std::exception& e) {
        report(n, false, std::string("threw: ") + e.what());
    }
}

} // namespace

int main()
{
    guarded(1, criterion1);
    guarded(2, criterion2);
    guarded(3, criterion3);
    guarded(4, criterion4);
    guarded(5, criterion5);
    guarded(6, criterion6);
    guarded(7, criterion7);
    guarded(8, criterion8);
    guarded(9, criterion9);
    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
