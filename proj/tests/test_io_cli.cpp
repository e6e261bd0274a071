#include "doctest.h"

#include <filesystem>

#include "evcasimir/cli.hpp"
#include "evcasimir/errors.hpp"
#include "evcasimir/io.hpp"
#include "evcasimir/random_fields.hpp"
#include "oracles.hpp"

using namespace evc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    fs::path d = fs::temp_directory_path() / ("evcasimir_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

int run_cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "evcasimir");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return cli::main(static_cast<int>(argv.size()), argv.data());
}

} // namespace

TEST_SUITE("io_cli") {

TEST_CASE("distribution file round trip, inline and sidecar")
{
    fs::path d = scratch("dist");
    std::mt19937_64 rng(70);
    auto f = random_field(rng, RandomFieldSpec{}, 1.0, 0.3, 0.006);
    AdmissibleParams p;
    p.k = 1.5;
    p = p.validated();
    for (bool side : {false, true}) {
        std::string path = (d / (side ? "b.json" : "a.json")).string();
        write_distribution(path, f, 1.5, p, side);
        auto back = read_distribution(path);
        CHECK(back.f.f == f.f);
        CHECK(back.f.grid.r == f.grid.r);
        CHECK(back.f.grid.v == f.grid.v);
        CHECK(back.f.grid.c == f.grid.c);
        CHECK(back.k == 1.5);
        CHECK(back.params.sigma0 == p.sigma0);
    }
    CHECK(fs::exists(d / "b.json.f64"));
    CHECK(fs::file_size(d / "b.json.f64") == 8 * f.f.size());
    CHECK_THROWS_AS(read_distribution((d / "missing.json").string()), IoError);
}

TEST_CASE("profile csv and report json round trip")
{
    RadialProfile p;
    p.r = {0.1, 0.2};
    p.rho = {1.0 / 3.0, 2e-17};
    p.m = {1e-3, 2e-3};
    p.lam = {0.01, 0.02};
    p.p = {0.5, 0.25};
    std::string csv = profile_csv(p);
    CHECK(csv.rfind("r,rho,m,lambda,mu,p\n", 0) == 0);
    auto back = read_profile_csv(csv);
    CHECK(back.rho == p.rho);
    CHECK(back.p == p.p);
    CHECK(back.mu.empty());

    FunctionalReport r{-0.1, 0.2, 0.3, 0.1, -0.1, 1.0 / 7.0, 0.01};
    json j = to_json(r);
    for (const char* key : {"D", "M", "M0", "E_b", "E_Cb", "Psi", "max_two_m_over_r"}) CHECK(j.contains(key));
    auto r2 = report_from_json(json::parse(j.dump()));
    CHECK(r2.Psi == r.Psi);
    CHECK(r2.D == r.D);
}

TEST_CASE("parse_config defaults, derived constants and errors")
{
    auto cfg = cli::parse_config({"evcasimir", "check", "--k", "1.0", "--M", "1.0", "--beta", "0.3"});
    CHECK(cfg.command == "check");
    CHECK(cfg.params.sigma0 == doctest::Approx(std::min(1.0, 3 * 0.027 / (4 * oracle::pi))).epsilon(1e-14));
    CHECK(cfg.params.P0() == doctest::Approx(6400.0).epsilon(1e-12));
    CHECK(cfg.seed == 0);
    CHECK_THROWS_AS(cli::parse_config({"evcasimir", "check", "--M", "1"}), UsageError);
    CHECK_THROWS_AS(cli::parse_config({"evcasimir", "check", "--k", "3"}), UsageError);
    CHECK_THROWS_AS(cli::parse_config({"evcasimir", "--k", "1"}), UsageError);
    CHECK_THROWS_AS(cli::parse_config({"evcasimir", "rearrange", "--k", "1", "--input", "x", "--ops", "bogus"}),
                    UsageError);

    fs::path d = scratch("cfg");
    std::string path = (d / "c.json").string();
    write_atomic(path, R"({"k": 2.0, "M": 0.5, "beta": 0.2, "ops": ["cap", "improve_tail"], "input": "f.json"})");
    auto c2 = cli::parse_config({"evcasimir", "rearrange", "--config", path, "--M", "0.25"});
    CHECK(c2.params.k == 2.0);
    CHECK(c2.params.M == 0.25);
    CHECK(c2.params.beta == 0.2);
    CHECK(c2.ops == std::vector<std::string>{"cap", "improve_tail"});
    write_atomic(path, R"({"k": 1.0, "nonsense": 3})");
    CHECK_THROWS_AS(cli::parse_config({"evcasimir", "check", "--config", path}), UsageError);
}

TEST_CASE("evaluate on the zero distribution")
{
    fs::path d = scratch("eval");
    PhaseGrid g = make_grid(1.0, 3, 1.0, 3, 2);
    AdmissibleParams p;
    p = p.validated();
    write_distribution((d / "zero.json").string(), DistributionFunction(g), 1.0, p);
    CHECK(run_cli({"evaluate", "--k", "1", "--input", (d / "zero.json").string(), "--out", d.string()}) == 0);
    json j = json::parse(read_file((d / "evaluate.json").string()));
    CHECK(j["report"]["D"].get<double>() == 0.0);
    CHECK(j["admissible"].get<bool>() == false);
    CHECK(run_cli({"evaluate", "--k", "1", "--input", (d / "nope.json").string(), "--out", d.string()}) == 1);
    CHECK(run_cli({"evaluate", "--input", (d / "zero.json").string()}) == 2);
}

TEST_CASE("rearrange chain emits traces consistent with the written files")
{
    fs::path d = scratch("rearr");
    AdmissibleParams p;
    p.M = 1.0;
    p.beta = 0.3;
    p = p.validated();
    RandomFieldSpec s;
    s.tail_lo = 1.1 * p.P0();
    s.tail_hi = 1.6 * p.P0();
    s.tail_fraction = 0.3;
    std::mt19937_64 rng(71);
    auto f = random_field(rng, s, p.M, p.beta, 1.0);
    std::string in = (d / "f.json").string();
    write_distribution(in, f, 1.0, p);
    CHECK(run_cli({"rearrange", "--k", "1", "--M", "1", "--beta", "0.3", "--input", in, "--ops",
                   "cap,improve_tail", "--out", d.string()}) == 0);
    json j = json::parse(read_file((d / "rearrange_traces.json").string()));
    REQUIRE(j["traces"].size() == 2);
    double prev = evaluate(f, 1.0).D;
    for (const auto& t : j["traces"]) {
        auto out = read_distribution((d / t["output"].get<std::string>()).string());
        double D = evaluate(out.f, 1.0).D;
        CHECK(D == t["D_after"].get<double>());
        CHECK(D <= prev + 1e-10);
        prev = D;
    }
}

TEST_CASE("static and witness commands write their files")
{
    fs::path d = scratch("static");
    CHECK(run_cli({"static", "--k", "1", "--eps", "0.9", "--out", d.string()}) == 0);
    json meta = json::parse(read_file((d / "static.json").string()));
    for (const char* key : {"k", "central_eps", "C", "R0", "M", "D"}) CHECK(meta.contains(key));
    auto prof = read_profile_csv(read_file((d / "static_profile.csv").string()));
    CHECK(prof.r.size() == prof.mu.size());
    CHECK(prof.m.back() == doctest::Approx(meta["M"].get<double>()).epsilon(1e-3));

    CHECK(run_cli({"witness", "--k", "1", "--M", "1", "--b", "0.05", "--out", d.string()}) == 0);
    json w = json::parse(read_file((d / "witness.json").string()));
    CHECK(w["rel_err"].get<double>() <= 1e-6);
    auto wf = read_distribution((d / "witness_f.json").string());
    CHECK(evaluate(wf.f, 1.0).D == w["D_quadrature"].get<double>());
}

TEST_CASE("check is reproducible")
{
    fs::path a = scratch("check_a"), b = scratch("check_b");
    CHECK(run_cli({"check", "--k", "1", "--count", "3", "--out", a.string()}) == 0);
    CHECK(run_cli({"check", "--k", "1", "--count", "3", "--out", b.string()}) == 0);
    CHECK(read_file((a / "check_report.json").string()) == read_file((b / "check_report.json").string()));
}

}
