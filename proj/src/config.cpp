#include "flowatlas/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "flowatlas/catalog.hpp"

namespace flowatlas {

using nlohmann::json;

namespace {

class Reader
{
public:
    explicit Reader(std::string origin) : origin_(std::move(origin)) {}

    [[noreturn]] void fail(const std::string& field, const std::string& message) const
    {
        throw ConfigError(origin_, field, message);
    }

    double number(const json& j, const std::string& field) const
    {
        if (!j.is_number())
            fail(field, "expected a number");
        const double v = j.get<double>();
        if (!std::isfinite(v))
            fail(field, "expected a finite number");
        return v;
    }

    double positive(const json& j, const std::string& field) const
    {
        const double v = number(j, field);
        if (!(v > 0.0))
            fail(field, "must be positive");
        return v;
    }

    std::uint64_t unsigned_int(const json& j, const std::string& field) const
    {
        if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
            fail(field, "expected a non-negative integer");
        return j.get<std::uint64_t>();
    }

    std::vector<double> numbers(const json& j, const std::string& field) const
    {
        if (!j.is_array())
            fail(field, "expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < j.size(); ++i)
            out.push_back(number(j[i], field + "[" + std::to_string(i) + "]"));
        return out;
    }

    // Interval bound; null means unbounded.
    double bound(const json& j, const std::string& field, double if_null) const
    {
        if (j.is_null())
            return if_null;
        return number(j, field);
    }

    expr::Expression expression(const json& j, const std::string& field, expr::Dialect d, std::size_t n) const
    {
        if (!j.is_string())
            fail(field, "expected an expression string");
        const std::string src = j.get<std::string>();
        auto e = expr::parse(src, d);
        if (!e)
            fail(field, "parse error at offset " + std::to_string(e.error().offset) + ": " + e.error().message);
        if (auto bad = expr::validate(*e, n))
            fail(field, "unknown variable " + bad->variable + " for dimension " + std::to_string(n));
        return std::move(e).value();
    }

    std::size_t dimension(const json& obj, const std::string& field) const
    {
        if (!obj.contains("n"))
            fail(field + ".n", "missing dimension");
        const auto n = unsigned_int(obj["n"], field + ".n");
        if (n == 0 || n > 15)
            fail(field + ".n", "dimension must be between 1 and 15");
        return static_cast<std::size_t>(n);
    }

    std::vector<expr::Expression> expressions(const json& j, const std::string& field, expr::Dialect d,
                                              std::size_t n) const
    {
        if (!j.is_array())
            fail(field, "expected an array of expressions");
        if (j.size() != n)
            fail(field, "expected " + std::to_string(n) + " expressions, got " + std::to_string(j.size()));
        std::vector<expr::Expression> out;
        for (std::size_t i = 0; i < j.size(); ++i)
            out.push_back(expression(j[i], field + "[" + std::to_string(i) + "]", d, n));
        return out;
    }

private:
    std::string origin_;
};

void read_system(const Reader& r, const json& sys, RunSpec& spec)
{
    if (!sys.is_object())
        r.fail("system", "expected an object");
    const int sources = static_cast<int>(sys.contains("catalog")) + static_cast<int>(sys.contains("field"))
                        + static_cast<int>(sys.contains("family"));
    if (sources != 1)
        r.fail("system", "exactly one system source (catalog, field or family) is required");

    if (sys.contains("catalog")) {
        if (!sys["catalog"].is_string())
            r.fail("system.catalog", "expected a catalog name");
        const auto name = sys["catalog"].get<std::string>();
        const CatalogEntry* entry = find_catalog(name);
        if (!entry)
            r.fail("system.catalog", "unknown catalog entry '" + name + "'");
        spec.source = "catalog:" + name;
        spec.n = entry->n;
        spec.field = catalog_field(*entry);
        spec.family = catalog_family(*entry);
        return;
    }

    if (sys.contains("field")) {
        const json& f = sys["field"];
        if (!f.is_object())
            r.fail("system.field", "expected an object");
        spec.source = "field";
        spec.n = r.dimension(f, "system.field");
        if (!f.contains("rhs"))
            r.fail("system.field.rhs", "missing right-hand side");
        auto rhs = r.expressions(f["rhs"], "system.field.rhs", expr::Dialect::field, spec.n);
        DomainSpec dom;
        dom.n = spec.n;
        if (f.contains("domain")) {
            const json& d = f["domain"];
            if (!d.is_object())
                r.fail("system.field.domain", "expected an object");
            if (d.contains("time")) {
                const json& t = d["time"];
                if (!t.is_array() || t.size() != 2)
                    r.fail("system.field.domain.time", "expected [lo, hi]");
                dom.time_box = {r.bound(t[0], "system.field.domain.time[0]", -kInf),
                                r.bound(t[1], "system.field.domain.time[1]", kInf)};
                if (!(dom.time_box.lo < dom.time_box.hi))
                    r.fail("system.field.domain.time", "empty time interval");
            }
            if (d.contains("predicate"))
                dom.predicate = r.expression(d["predicate"], "system.field.domain.predicate", expr::Dialect::field,
                                             spec.n);
            if (d.contains("blowup_radius"))
                dom.blowup_radius = r.positive(d["blowup_radius"], "system.field.domain.blowup_radius");
        }
        spec.field = VectorField::from_expressions(std::move(dom), std::move(rhs));
        return;
    }

    const json& f = sys["family"];
    if (!f.is_object())
        r.fail("system.family", "expected an object");
    spec.source = "family";
    spec.n = r.dimension(f, "system.family");
    if (!f.contains("components"))
        r.fail("system.family.components", "missing components");
    auto comps = r.expressions(f["components"], "system.family.components", expr::Dialect::family, spec.n);
    std::optional<expr::Expression> pred;
    if (f.contains("domain_predicate"))
        pred = r.expression(f["domain_predicate"], "system.family.domain_predicate", expr::Dialect::family, spec.n);
    spec.family = closed_form_family(spec.n, std::move(comps), std::move(pred));
}

void read_integrator(const Reader& r, const json& j, IntegratorConfig& cfg)
{
    if (!j.is_object())
        r.fail("integrator", "expected an object");
    for (const auto& [key, value] : j.items()) {
        const std::string field = "integrator." + key;
        if (key == "rel_tol")
            cfg.rel_tol = r.positive(value, field);
        else if (key == "abs_tol")
            cfg.abs_tol = r.positive(value, field);
        else if (key == "h_init")
            cfg.h_init = r.positive(value, field);
        else if (key == "h_min")
            cfg.h_min = r.positive(value, field);
        else if (key == "blowup_radius")
            cfg.blowup_radius = r.positive(value, field);
        else if (key == "blowup_time_scale")
            cfg.blowup_time_scale = r.positive(value, field);
        else if (key == "max_steps")
            cfg.max_steps = static_cast<std::size_t>(r.unsigned_int(value, field));
        else if (key == "window") {
            const auto w = r.numbers(value, field);
            if (w.size() != 2)
                r.fail(field, "expected [lo, hi]");
            cfg.window_lo = w[0];
            cfg.window_hi = w[1];
        } else
            r.fail(field, "unknown key");
    }
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        r.fail("integrator", e.what());
    }
}

void read_plan(const Reader& r, const json& j, RunSpec& spec)
{
    if (!j.is_object())
        r.fail("plan", "expected an object");
    if (j.contains("time_grid"))
        spec.plan.time_grid = r.numbers(j["time_grid"], "plan.time_grid");
    if (j.contains("state_grid")) {
        const json& s = j["state_grid"];
        if (!s.is_array())
            r.fail("plan.state_grid", "expected an array of states");
        spec.plan.state_grid.clear();
        for (std::size_t i = 0; i < s.size(); ++i)
            spec.plan.state_grid.push_back(r.numbers(s[i], "plan.state_grid[" + std::to_string(i) + "]"));
    }
    if (j.contains("random_count"))
        spec.plan.random_count = static_cast<std::size_t>(r.unsigned_int(j["random_count"], "plan.random_count"));
    if (j.contains("seed"))
        spec.plan.seed = r.unsigned_int(j["seed"], "plan.seed");
    try {
        spec.plan.validate(spec.n);
    } catch (const std::invalid_argument& e) {
        r.fail("plan", e.what());
    }
}

void read_tolerances(const Reader& r, const json& j, CommandTolerances& tol)
{
    if (!j.is_object())
        r.fail("tolerances", "expected an object");
    for (const auto& [key, value] : j.items()) {
        const std::string field = "tolerances." + key;
        const double v = r.positive(value, field);
        if (key == "identity")
            tol.identity = v;
        else if (key == "inverse")
            tol.inverse = v;
        else if (key == "cocycle")
            tol.cocycle = v;
        else if (key == "openness_delta")
            tol.openness_delta = v;
        else if (key == "autonomy")
            tol.autonomy = v;
        else if (key == "group_law")
            tol.group_law = v;
        else if (key == "reference_field")
            tol.reference_field = v;
        else if (key == "roundtrip")
            tol.roundtrip = v;
        else if (key == "wronski")
            tol.wronski = v;
        else if (key == "smoothing")
            tol.smoothing = v;
        else
            r.fail(field, "unknown condition");
    }
}

void read_reconstruct(const Reader& r, const json& j, RunSpec& spec)
{
    if (!j.is_object())
        r.fail("reconstruct", "expected an object");
    if (j.contains("h"))
        spec.fd_step = r.positive(j["h"], "reconstruct.h");
    if (j.contains("richardson")) {
        if (!j["richardson"].is_boolean())
            r.fail("reconstruct.richardson", "expected a boolean");
        spec.richardson = j["richardson"].get<bool>();
    }
    if (j.contains("roundtrip")) {
        if (!j["roundtrip"].is_boolean())
            r.fail("reconstruct.roundtrip", "expected a boolean");
        spec.roundtrip = j["roundtrip"].get<bool>();
    }
    if (j.contains("grid")) {
        const json& g = j["grid"];
        if (!g.is_object() || !g.contains("time") || !g.contains("box") || !g.contains("points"))
            r.fail("reconstruct.grid", "expected {\"time\": [lo, hi, points], \"box\": [[lo, hi]...], \"points\": int}");
        const auto t = r.numbers(g["time"], "reconstruct.grid.time");
        if (t.size() != 3 || t[2] < 2 || t[2] != std::floor(t[2]))
            r.fail("reconstruct.grid.time", "expected [lo, hi, points] with points >= 2");
        const json& box = g["box"];
        if (!box.is_array() || box.size() != spec.n)
            r.fail("reconstruct.grid.box", "expected one [lo, hi] pair per state component");
        std::vector<std::pair<double, double>> bounds;
        for (std::size_t i = 0; i < box.size(); ++i) {
            const auto b = r.numbers(box[i], "reconstruct.grid.box[" + std::to_string(i) + "]");
            if (b.size() != 2)
                r.fail("reconstruct.grid.box[" + std::to_string(i) + "]", "expected [lo, hi]");
            bounds.emplace_back(b[0], b[1]);
        }
        const auto points = r.unsigned_int(g["points"], "reconstruct.grid.points");
        try {
            spec.tabulation = TabulationGrid::uniform(t[0], t[1], static_cast<std::size_t>(t[2]), bounds,
                                                      static_cast<std::size_t>(points));
        } catch (const std::invalid_argument& e) {
            r.fail("reconstruct.grid", e.what());
        }
    }
}

void read_decompose(const Reader& r, const json& j, RunSpec& spec)
{
    if (!j.is_object())
        r.fail("decompose", "expected an object");
    if (j.contains("tau0"))
        spec.tau0 = r.number(j["tau0"], "decompose.tau0");
    if (j.contains("grid")) {
        const json& g = j["grid"];
        if (g.is_array()) {
            spec.decompose_grid = r.numbers(g, "decompose.grid");
        } else if (g.is_object() && g.contains("start") && g.contains("stop") && g.contains("step")) {
            const double start = r.number(g["start"], "decompose.grid.start");
            const double stop = r.number(g["stop"], "decompose.grid.stop");
            const double step = r.positive(g["step"], "decompose.grid.step");
            if (!(stop > start))
                r.fail("decompose.grid", "stop must exceed start");
            const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
            spec.decompose_grid.clear();
            for (std::size_t i = 0; i < count; ++i)
                spec.decompose_grid.push_back(start + step * static_cast<double>(i));
        } else
            r.fail("decompose.grid", "expected an array or {start, stop, step}");
        if (spec.decompose_grid.empty() || !std::is_sorted(spec.decompose_grid.begin(), spec.decompose_grid.end()))
            r.fail("decompose.grid", "grid must be nonempty and sorted");
    }
}

void read_mollify(const Reader& r, const json& j, RunSpec& spec)
{
    if (!j.is_object())
        r.fail("mollify", "expected an object");
    if (j.contains("epsilon"))
        spec.epsilon = r.positive(j["epsilon"], "mollify.epsilon");
    if (j.contains("panels")) {
        const auto p = r.unsigned_int(j["panels"], "mollify.panels");
        if (p < 2 || p % 2 != 0)
            r.fail("mollify.panels", "panel count must be even and at least 2");
        spec.panels = static_cast<std::size_t>(p);
    }
    if (j.contains("alphas"))
        spec.alphas = r.numbers(j["alphas"], "mollify.alphas");
}

} // namespace

ConfigError::ConfigError(std::string path, std::string field, std::string message)
    : std::runtime_error(path + ": " + field + ": " + message), path_(std::move(path)), field_(std::move(field)),
      message_(std::move(message))
{
}

Tolerances CommandTolerances::suite_for(FamilyKind kind) const
{
    Tolerances t = Tolerances::defaults_for(kind);
    if (identity)
        t.identity = *identity;
    if (inverse)
        t.inverse = *inverse;
    if (cocycle)
        t.cocycle = *cocycle;
    if (openness_delta)
        t.openness_delta = *openness_delta;
    return t;
}

RunSpec parse_config(const std::string& text, const std::string& origin)
{
    const Reader r(origin);
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        r.fail("<document>", "JSON parse error at byte " + std::to_string(e.byte) + ": " + e.what());
    }
    if (!root.is_object())
        r.fail("<document>", "expected a JSON object");
    for (const auto& [key, value] : root.items()) {
        static const char* known[] = {"system", "integrator", "plan", "tolerances", "reconstruct", "decompose",
                                      "mollify"};
        if (std::find(std::begin(known), std::end(known), key) == std::end(known))
            r.fail(key, "unknown top-level key");
    }
    if (!root.contains("system"))
        r.fail("system", "missing system");

    RunSpec spec;
    try {
        read_system(r, root["system"], spec);
    } catch (const std::invalid_argument& e) {
        r.fail("system", e.what());
    }
    spec.plan = SamplePlan::default_for(spec.n);
    if (root.contains("integrator"))
        read_integrator(r, root["integrator"], spec.integrator);
    if (root.contains("plan"))
        read_plan(r, root["plan"], spec);
    if (root.contains("tolerances"))
        read_tolerances(r, root["tolerances"], spec.tolerances);
    if (root.contains("reconstruct"))
        read_reconstruct(r, root["reconstruct"], spec);
    if (root.contains("decompose"))
        read_decompose(r, root["decompose"], spec);
    if (root.contains("mollify"))
        read_mollify(r, root["mollify"], spec);
    if (spec.decompose_grid.empty())
        spec.decompose_grid = spec.plan.time_grid;
    if (spec.alphas.empty())
        spec.alphas = spec.plan.time_grid;
    return spec;
}

RunSpec load_config(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError(path, "<file>", "cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

} // namespace flowatlas
