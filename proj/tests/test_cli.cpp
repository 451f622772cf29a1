#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

#include "flowatlas/cli.hpp"
#include "flowatlas/config.hpp"

using namespace flowatlas;
namespace fs = std::filesystem;

namespace {

fs::path scratch()
{
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / ("flowatlas_cli_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string write_config(const std::string& name, const std::string& text)
{
    const auto p = scratch() / name;
    std::ofstream(p) << text;
    return p.string();
}

struct Run
{
    int code;
    std::vector<nlohmann::json> records;
    std::string text;
};

Run run(std::vector<std::string> args)
{
    std::ostringstream out, err;
    Run r;
    r.code = run_cli(args, out, err);
    r.text = out.str();
    std::istringstream lines(r.text);
    for (std::string line; std::getline(lines, line);)
        r.records.push_back(nlohmann::json::parse(line));
    return r;
}

const nlohmann::json* find(const Run& r, const std::string& kind, const std::string& name = {})
{
    for (const auto& rec : r.records)
        if (rec["kind"] == kind && (name.empty() || rec.value("name", "") == name))
            return &rec;
    return nullptr;
}

std::string riccati_cfg() { return write_config("riccati.json", R"j({"system": {"catalog": "riccati"}})j"); }

} // namespace

TEST_CASE("loading configs")
{
    const auto spec = load_config(riccati_cfg());
    CHECK(spec.n == 1);
    CHECK(spec.source == "catalog:riccati");
    REQUIRE(spec.field.has_value());
    CHECK(expr::pretty_print(spec.field->expressions().at(0)) == "(x1 ^ 2)");
    REQUIRE(spec.family.has_value());
    const double a[] = {0.5};
    CHECK(spec.family->evaluate(1.0, 0.0, a)->at(0) == 1.0);
    CHECK(spec.plan.time_grid.size() == 6);
}

TEST_CASE("config errors")
{
    auto message = [](const std::string& text) {
        try {
            parse_config(text, "cfg.json");
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(message(R"j({"system": {"catalog": "riccati", "field": {"n": 1, "rhs": ["x1"]}}})j").find(
              "exactly one system source")
          != std::string::npos);
    CHECK(message(R"j({"system": {"field": {"n": 1, "rhs": ["x2"]}}})j").find("x2") != std::string::npos);
    CHECK(message(R"j({"system": {"field": {"n": 1, "rhs": ["x1 +"]}}})j").find("offset 4") != std::string::npos);
    CHECK(message(R"j({"system": {"catalog": "nope"}})j").find("unknown catalog") != std::string::npos);
    CHECK(message(R"j({"system": {"catalog": "riccati"}, "extra": 1})j").find("unknown top-level") != std::string::npos);
    CHECK(message(R"j({"system": {"catalog": "riccati"}, "integrator": {"rel_tol": -1}})j").find("integrator.rel_tol")
          != std::string::npos);
    CHECK(message(R"j({"system": {"catalog": "riccati"}, "plan": {"time_grid": [1, 0]}})j").find("plan")
          != std::string::npos);

    const auto bad_json = message("{\"system\": \n {\"catalog\" 1}}");
    CHECK(bad_json.find("byte") != std::string::npos);

    try {
        parse_config(R"j({"system": {"field": {"n": 1, "rhs": ["x2"]}}})j", "cfg.json");
    } catch (const ConfigError& e) {
        CHECK(e.path() == "cfg.json");
        CHECK(e.field() == "system.field.rhs[0]");
    }
    CHECK_THROWS_AS(load_config((scratch() / "missing.json").string()), ConfigError);
}

TEST_CASE("config sections")
{
    const auto spec = parse_config(R"j({
        "system": {"field": {"n": 2, "rhs": ["-x2", "x1"], "domain": {"time": [-5, null], "predicate": "4 - x1^2"}}},
        "integrator": {"rel_tol": 1e-8, "abs_tol": 1e-10, "window": [-10, 10]},
        "plan": {"time_grid": [0, 1], "state_grid": [[0, 0], [1, 1]], "random_count": 3, "seed": 7},
        "tolerances": {"cocycle": 1e-6, "roundtrip": 1e-4},
        "reconstruct": {"h": 1e-3, "richardson": false, "grid": {"time": [0, 1, 3], "box": [[-1, 1], [-1, 1]], "points": 5}},
        "decompose": {"tau0": 0.5, "grid": {"start": 0, "stop": 1, "step": 0.25}},
        "mollify": {"epsilon": 0.1, "panels": 64, "alphas": [0.5]}
    })j");
    CHECK(spec.n == 2);
    CHECK_FALSE(spec.family.has_value());
    CHECK(spec.field->domain().time_box.lo == -5.0);
    CHECK(std::isinf(spec.field->domain().time_box.hi));
    CHECK(spec.integrator.rel_tol == 1e-8);
    CHECK(spec.integrator.window_lo == -10.0);
    CHECK(spec.plan.seed == 7);
    CHECK(spec.plan.random_count == 3);
    CHECK(spec.tolerances.suite_for(FamilyKind::numeric).cocycle == 1e-6);
    CHECK(spec.tolerances.suite_for(FamilyKind::numeric).identity == 1e-7);
    CHECK(spec.tolerances.roundtrip == 1e-4);
    CHECK(spec.fd_step == 1e-3);
    CHECK_FALSE(spec.richardson);
    CHECK(spec.tabulation->site_count() == 75);
    CHECK(spec.tau0 == 0.5);
    CHECK(spec.decompose_grid == std::vector<double>{0, 0.25, 0.5, 0.75, 1});
    CHECK(spec.epsilon == 0.1);
    CHECK(spec.panels == 64);
    CHECK(spec.alphas == std::vector<double>{0.5});

    const auto fam = parse_config(R"j({"system": {"family": {"n": 1, "components": ["a1 + tau - sigma"]}}})j");
    CHECK(fam.family.has_value());
    CHECK_FALSE(fam.field.has_value());
}

TEST_CASE("flow command")
{
    const auto cfg = riccati_cfg();
    auto ok = run({"flow", "--config", cfg, "--tau", "1", "--sigma", "0", "--a", "0.5", "--no-timestamp"});
    CHECK(ok.code == 0);
    REQUIRE(find(ok, "value"));
    CHECK((*find(ok, "value"))["value"] == nlohmann::json::array({1.0}));

    auto out = run({"flow", "--config", cfg, "--tau", "2", "--sigma", "0", "--a", "0.5", "--no-timestamp"});
    CHECK(out.code == 1);
    REQUIRE(find(out, "error"));
    CHECK((*find(out, "error"))["error"] == "out_of_domain");

    auto num = run({"flow", "--config", cfg, "--tau", "3", "--sigma", "0", "--a", "0.5", "--numeric"});
    CHECK(num.code == 1);
    CHECK((*find(num, "error"))["escape"] == "blow_up");

    auto dim = run({"flow", "--config", cfg, "--tau", "1", "--sigma", "0", "--a", "0.5,1"});
    CHECK(dim.code == 2);
}

TEST_CASE("usage and config errors exit 2")
{
    CHECK(run({}).code == 2);
    CHECK(run({"flow", "--tau", "1"}).code == 2);
    CHECK(run({"bogus"}).code == 2);
    const auto bad = write_config("bad.json", R"j({"system": {"catalog": "riccati", "family": {}}})j");
    auto r = run({"verify", "--config", bad});
    CHECK(r.code == 2);
    REQUIRE(find(r, "error"));
    CHECK((*find(r, "error"))["error"] == "config");
    std::ostringstream out, err;
    CHECK(run_cli({"--help"}, out, err) == 0);
    CHECK(out.str().find("verify") != std::string::npos);
}

TEST_CASE("interval command")
{
    auto r = run({"interval", "--config", riccati_cfg(), "--rho", "0", "--a", "0.5", "--no-timestamp"});
    CHECK(r.code == 0);
    const auto* j = find(r, "interval");
    REQUIRE(j);
    CHECK((*j)["lower"] == -50.0);
    CHECK((*j)["lower_kind"] == "window_limit");
    CHECK((*j)["upper_kind"] == "blow_up");
    CHECK(std::abs((*j)["upper"].get<double>() - 2.0) <= 1e-3);

    const auto fam = write_config("fam.json", R"j({"system": {"family": {"n": 1,
        "components": ["a1 / (1 + (sigma - tau) * a1)"], "domain_predicate": "1 - (tau - sigma) * a1"}}})j");
    auto s = run({"interval", "--config", fam, "--rho", "0", "--a", "0.5"});
    CHECK(s.code == 0);
    CHECK((*find(s, "interval"))["upper_kind"] == "left_domain");
}

TEST_CASE("verify command")
{
    auto r = run({"verify", "--config", riccati_cfg(), "--no-timestamp"});
    CHECK(r.code == 0);
    CHECK(r.records.front()["kind"] == "run");
    CHECK_FALSE(r.records.front().contains("timestamp"));
    CHECK(r.records.back()["kind"] == "summary");
    CHECK(r.records.back()["pass"] == true);
    for (const char* name : {"identity", "inverse", "cocycle", "domain_inclusion", "interval", "openness"})
        CHECK_MESSAGE(find(r, "condition", name), name);

    auto stamped = run({"verify", "--config", riccati_cfg()});
    CHECK(stamped.records.front().contains("timestamp"));

    const auto bad = write_config("perturbed.json", R"j({"system": {"family": {"n": 1,
        "components": ["a1 / (1 + (sigma - tau) * a1) + 0.01 * (tau - sigma)^2"],
        "domain_predicate": "1 - (tau - sigma) * a1"}}})j");
    auto f = run({"verify", "--config", bad, "--no-timestamp"});
    CHECK(f.code == 1);
    CHECK((*find(f, "condition", "cocycle"))["pass"] == false);
}

TEST_CASE("verify is deterministic")
{
    const auto cfg = write_config("numeric.json", R"j({"system": {"field": {"n": 1, "rhs": ["x1^2"]}}})j");
    auto a = run({"verify", "--config", cfg, "--seed", "5", "--no-timestamp"});
    auto b = run({"verify", "--config", cfg, "--seed", "5", "--no-timestamp"});
    auto c = run({"verify", "--config", cfg, "--seed", "5", "--no-timestamp", "--serial"});
    auto d = run({"verify", "--config", cfg, "--seed", "6", "--no-timestamp"});
    CHECK(a.code == 0);
    CHECK(a.text == b.text);
    CHECK(a.text == c.text);
    CHECK(a.text != d.text);
}

TEST_CASE("output to a file")
{
    const auto path = (scratch() / "report.ndjson").string();
    auto r = run({"verify", "--config", riccati_cfg(), "--no-timestamp", "--out", path});
    CHECK(r.code == 0);
    CHECK(r.text.empty());
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    CHECK(nlohmann::json::parse(first)["kind"] == "run");
}

TEST_CASE("reconstruct command")
{
    const auto cfg = write_config("rec.json", R"j({"system": {"catalog": "riccati"},
        "reconstruct": {"grid": {"time": [-1.25, 1.75, 13], "box": [[-2.5, 2.5]], "points": 4001}, "roundtrip": true}})j");
    const auto csv = (scratch() / "field.csv").string();
    auto r = run({"reconstruct", "--config", cfg, "--export", csv, "--no-timestamp"});
    CHECK(r.code == 0);
    const auto* ref = find(r, "condition", "reference_field");
    REQUIRE(ref);
    CHECK((*ref)["max_residual"].get<double>() <= 1e-6);
    const auto* rt = find(r, "condition", "roundtrip");
    REQUIRE(rt);
    CHECK((*rt)["pass"] == true);
    CHECK(fs::exists(csv));
}

TEST_CASE("autonomous command")
{
    auto r = run({"autonomous", "--config", riccati_cfg(), "--no-timestamp"});
    CHECK(r.code == 0);
    CHECK(find(r, "condition", "group_law"));
    CHECK(r.records.back()["autonomous"] == true);

    const auto shear = write_config("shear.json", R"j({"system": {"catalog": "shear"}})j");
    auto s = run({"autonomous", "--config", shear, "--no-timestamp"});
    CHECK(s.code == 1);
    CHECK(s.records.back()["autonomous"] == false);
}

TEST_CASE("decompose command")
{
    const auto cfg = write_config("affine.json", R"j({"system": {"catalog": "affine_scalar"},
        "decompose": {"grid": {"start": 0, "stop": 1, "step": 0.01}}})j");
    auto r = run({"decompose", "--config", cfg, "--no-timestamp"});
    CHECK(r.code == 0);
    CHECK((*find(r, "condition", "wronski_consistency"))["pass"] == true);

    auto bad = run({"decompose", "--config", riccati_cfg()});
    CHECK(bad.code == 1);
    CHECK((*find(bad, "error"))["error"] == "not_affine");
}

TEST_CASE("mollify command")
{
    const auto cfg = write_config("rotation.json", R"j({"system": {"catalog": "rotation"}})j");
    auto r = run({"mollify", "--config", cfg, "--eps", "0.25", "--alpha", "-1,-0.3,0,0.3,1", "--no-timestamp"});
    CHECK(r.code == 0);
    const auto* m = find(r, "mollifier");
    REQUIRE(m);
    CHECK((*find(r, "condition", "smoothing"))["samples_checked"] == 5);

    auto singular = run({"mollify", "--config", cfg, "--eps", "3.141592653589793"});
    CHECK(singular.code == 1);
}
