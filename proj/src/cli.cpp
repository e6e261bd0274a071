#include "evcasimir/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <set>

#include "CLI11.hpp"

#include "evcasimir/checks.hpp"
#include "evcasimir/errors.hpp"
#include "evcasimir/io.hpp"
#include "evcasimir/minimizer.hpp"
#include "evcasimir/rearrangement.hpp"
#include "evcasimir/static_solver.hpp"

namespace fs = std::filesystem;

namespace evc::cli {

namespace {

const std::set<std::string> kOps = {"cap", "cap_excess", "tail", "improve_tail", "remove_gap",
                                    "restrict_rescale"};

bool has_flag(const std::vector<std::string>& args, const std::string& name)
{
    for (const auto& a : args) {
        if (a == "--" + name || a == "--no-" + name) return true;
        if (a.rfind("--" + name + "=", 0) == 0) return true;
    }
    return false;
}

std::string config_path(const std::vector<std::string>& args)
{
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw UsageError("--config: missing file name");
            return args[i + 1];
        }
        if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
    }
    return {};
}

// Appends "--key value" for every config entry not given as a flag.
std::vector<std::string> merge_config(std::vector<std::string> args, const std::string& path)
{
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw UsageError("--config: " + std::string(e.what()));
    } catch (const IoError& e) {
        throw UsageError("--config: " + std::string(e.what()));
    }
    if (!j.is_object()) throw UsageError("--config: top level must be an object");
    for (const auto& [key, val] : j.items()) {
        if (key == "config" || key == "command") continue;
        if (has_flag(args, key)) continue;
        if (val.is_boolean()) {
            args.push_back("--" + key + "=" + (val.get<bool>() ? "true" : "false"));
        } else if (val.is_array()) {
            std::string s;
            for (const auto& x : val) {
                if (!s.empty()) s += ',';
                s += x.is_string() ? x.get<std::string>() : x.dump();
            }
            args.push_back("--" + key);
            args.push_back(s);
        } else if (val.is_string()) {
            args.push_back("--" + key);
            args.push_back(val.get<std::string>());
        } else if (val.is_number()) {
            args.push_back("--" + key);
            args.push_back(val.dump());
        } else {
            throw UsageError("--config: field '" + key + "' has an unsupported type");
        }
    }
    return args;
}

void validate(RunConfig& cfg)
{
    try {
        cfg.params = cfg.params.validated();
    } catch (const ParameterError& e) {
        std::string msg = e.what();
        throw UsageError("--" + msg.substr(0, msg.find(' ')) + ": " + msg);
    }
    const std::string& c = cfg.command;
    if (c == "static" && !(cfg.eps > 0.0 && cfg.eps < 1.0))
        throw UsageError("--eps: central eps must lie in (0, 1)");
    if (c == "sweep") {
        if (cfg.n < 2) throw UsageError("--n: need at least 2 members");
        if (!(cfg.eps_lo > 0.0 && cfg.eps_hi < 1.0 && cfg.eps_lo <= cfg.eps_hi))
            throw UsageError("--eps-lo/--eps-hi: range must lie in (0, 1) with lo <= hi");
    }
    if (c == "witness" && !(cfg.b > 0.0)) throw UsageError("--b: must be positive");
    if ((c == "evaluate" || c == "rearrange") && cfg.input.empty())
        throw UsageError("--input: required for " + c);
    if (c == "rearrange") {
        if (cfg.ops.empty()) throw UsageError("--ops: at least one operator required");
        for (const auto& op : cfg.ops)
            if (!kOps.count(op)) throw UsageError("--ops: unknown operator '" + op + "'");
    }
    if (c == "minimize" && cfg.init != "flat" && cfg.init != "static")
        throw UsageError("--init: expected flat or static");
    if (c == "check" && cfg.count == 0) throw UsageError("--count: must be positive");
}

std::string out_path(const RunConfig& cfg, const std::string& name)
{
    return (fs::path(cfg.out_dir) / name).string();
}

void emit(const json& j) { std::cout << j.dump(2) << "\n"; }

int cmd_static(const RunConfig& cfg)
{
    StaticSolution sol = integrate_static(cfg.params.k, cfg.eps);
    json meta = static_metadata(sol);
    CbecVerdict v = check_cbec(sol.report);
    double absD = std::fabs(sol.report.D);
    meta["cbec"] = to_json(v);
    meta["mass_identity_residual"] = std::fabs(sol.mass_identity_integral - sol.M) / sol.M;
    meta["sandwich_ok"] = 0.5 * sol.C * sol.M <= absD && absD <= sol.C * sol.M;
    write_atomic(out_path(cfg, "static.json"), meta.dump(2) + "\n");
    write_atomic(out_path(cfg, "static_profile.csv"), profile_csv(sol.profile));
    emit(meta);
    return 0;
}

int cmd_sweep(const RunConfig& cfg)
{
    auto rows = sweep_family(cfg.params.k, cfg.eps_lo, cfg.eps_hi, cfg.n);
    write_atomic(out_path(cfg, "sweep.csv"), sweep_csv(rows));
    std::size_t ok = 0, cbec = 0;
    for (const auto& r : rows) {
        if (r.error.empty()) ++ok;
        if (r.cbec) ++cbec;
    }
    emit(json{{"file", "sweep.csv"}, {"rows", rows.size()}, {"solved", ok}, {"cbec_true", cbec}});
    return 0;
}

int cmd_witness(const RunConfig& cfg)
{
    const AdmissibleParams& p = cfg.params;
    std::size_t nr = cfg.grid.nr ? cfg.grid.nr : 64;
    std::size_t nv = cfg.grid.nv ? cfg.grid.nv : 16;
    Witness w = cbec_witness(p.k, p.M, p.sigma0, cfg.b, nr, nv);
    FunctionalReport rep = evaluate(w.f, p.k);
    AdmissibilityReport adm = check_admissible(w.f, p);
    json j{{"A", w.A},
           {"a", w.a},
           {"b", w.b},
           {"c", w.c},
           {"theta_b", w.theta_b},
           {"D_closed", w.D_closed},
           {"D_quadrature", rep.D},
           {"rel_err", std::fabs(rep.D - w.D_closed) / std::fabs(w.D_closed)},
           {"abs_D_over_M", std::fabs(w.D_closed) / p.M},
           {"mass_ratio_lhs", w.mass_ratio_lhs},
           {"mass_ratio_rhs", w.mass_ratio_rhs},
           {"report", to_json(rep)},
           {"admissibility", to_json(adm)},
           {"verdict", to_json(check_cbec(rep))}};
    write_distribution(out_path(cfg, "witness_f.json"), w.f, p.k, p, cfg.sidecar);
    write_atomic(out_path(cfg, "witness.json"), j.dump(2) + "\n");
    emit(j);
    return 0;
}

int cmd_evaluate(const RunConfig& cfg)
{
    DistributionFile df = read_distribution(cfg.input);
    FunctionalReport rep = evaluate(df.f, cfg.params.k);
    AdmissibilityReport adm = check_admissible(df.f, cfg.params);
    json j{{"input", cfg.input},
           {"k", cfg.params.k},
           {"report", to_json(rep)},
           {"admissible", adm.admissible},
           {"admissibility", to_json(adm)},
           {"verdict", to_json(check_cbec(rep))}};
    write_atomic(out_path(cfg, "evaluate.json"), j.dump(2) + "\n");
    emit(j);
    return 0;
}

int cmd_rearrange(const RunConfig& cfg)
{
    DistributionFile df = read_distribution(cfg.input);
    const AdmissibleParams& p = cfg.params;
    TailOptions topt;
    topt.adaptive_nodes = cfg.grid.adaptive_nodes;
    DistributionFunction cur = df.f;
    json traces = json::array();
    for (std::size_t i = 0; i < cfg.ops.size(); ++i) {
        const std::string& op = cfg.ops[i];
        MachineResult res;
        if (op == "cap" || op == "cap_excess") {
            res = cap_excess(cur, p.k);
        } else if (op == "tail") {
            res = tail_rearrange(cur, cfg.P > 0 ? cfg.P : p.P0(), p, topt);
        } else if (op == "improve_tail") {
            res = improve_tail(cur, p, topt);
        } else if (op == "remove_gap") {
            if (!(cfg.gap_b > cfg.gap_a && cfg.gap_a > 0))
                throw UsageError("--gap-a/--gap-b: remove_gap needs 0 < a < b");
            res = remove_gap(cur, cfg.gap_a, cfg.gap_b, p);
        } else {
            if (!(cfg.R > 0)) throw UsageError("--R: restrict_rescale needs a positive radius");
            res = restrict_rescale(cur, cfg.R, p.k);
        }
        std::string name = "rearrange_" + std::to_string(i + 1) + "_" + op + ".json";
        write_distribution(out_path(cfg, name), res.first, p.k, p, cfg.sidecar);
        json t = to_json(res.second);
        t["output"] = name;
        traces.push_back(t);
        cur = std::move(res.first);
    }
    json j{{"input", cfg.input}, {"traces", traces}};
    write_atomic(out_path(cfg, "rearrange_traces.json"), j.dump(2) + "\n");
    emit(j);
    return 0;
}

// Static member with mass M on the low-compactness branch, if any.
bool static_of_mass(double k, double M, StaticSolution& out)
{
    // M(ε) peaks inside (0.5, 1) and falls to 0 at ε = 1; bisect right of the peak
    double lo = 0.5, best = 0.0;
    for (double e = 0.5; e < 0.995; e += 0.01) {
        double m = integrate_static(k, e).M;
        if (m > best) {
            best = m;
            lo = e;
        }
    }
    double hi = 1.0 - 1e-6;
    if (best < M || integrate_static(k, hi).M > M) return false;
    for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        if (integrate_static(k, mid).M > M)
            lo = mid;
        else
            hi = mid;
    }
    out = integrate_static(k, 0.5 * (lo + hi));
    return true;
}

int cmd_minimize(const RunConfig& cfg)
{
    const AdmissibleParams& p = cfg.params;
    StaticSolution ref;
    bool have_ref = static_of_mass(p.k, p.M, ref);
    double rmax = cfg.grid.rmax, vmax = cfg.grid.vmax;
    if (rmax <= 0 || vmax <= 0) {
        if (!have_ref)
            throw UsageError("--rmax/--vmax: no static member of this mass to size the grid");
        if (rmax <= 0) rmax = 1.6 * ref.R0;
        if (vmax <= 0) vmax = 1.3 * xi_max(ref.central_eps);
    }
    std::size_t nr = cfg.grid.nr ? cfg.grid.nr : 128;
    std::size_t nv = cfg.grid.nv ? cfg.grid.nv : 400;
    PhaseGrid g = make_grid(rmax, nr, vmax, nv, 1);
    std::vector<double> rho0;
    if (cfg.init == "static") {
        if (!have_ref) throw UsageError("--init: no static member of this mass");
        rho0 = profile_from_static(ref, g);
    } else {
        double R = cfg.init_R > 0 ? cfg.init_R : (have_ref ? 0.8 * ref.R0 : 0.5 * rmax);
        rho0 = flat_profile(g, p.M, R);
    }
    MinimizeOptions opt;
    opt.max_iter = cfg.max_iter;
    MinimizerState s = minimize(p, g, rho0, opt);
    DiagnosticsReport dg = convergence_diagnostics(s);
    json j{{"state", to_json(s)}, {"diagnostics", to_json(dg)}};
    if (have_ref) {
        j["static_reference"] = static_metadata(ref);
        j["D_rel_to_static"] = s.D / ref.report.D - 1.0;
    }
    RadialProfile prof = radial_profile(s.f);
    std::vector<double> mu = mu_at_edges(s);
    prof.mu.resize(prof.r.size());
    for (std::size_t i = 0; i < prof.r.size(); ++i) prof.mu[i] = 0.5 * (mu[i] + mu[i + 1]);
    write_atomic(out_path(cfg, "minimize_state.json"), j.dump(2) + "\n");
    write_atomic(out_path(cfg, "minimize_profile.csv"), profile_csv(prof));
    write_distribution(out_path(cfg, "minimize_f.json"), s.f, p.k, p, cfg.sidecar);
    json summary{{"D", s.D},
                 {"iter", s.iter},
                 {"converged", s.converged},
                 {"kkt_gap", s.kkt_gap},
                 {"diagnostics", to_json(dg)}};
    if (have_ref) summary["D_rel_to_static"] = j["D_rel_to_static"];
    emit(summary);
    return 0;
}

int cmd_check(const RunConfig& cfg)
{
    json rep = property_suite(cfg.params, cfg.seed, cfg.count);
    std::string text = rep.dump(2) + "\n";
    write_atomic(out_path(cfg, "check_report.json"), text);
    std::cout << text;
    return rep["pass"].get<bool>() ? 0 : 1;
}

void print_error(const char* kind, const std::string& msg, int status)
{
    std::cerr << json{{"error", kind}, {"message", msg}, {"exit", status}}.dump() << "\n";
}

} // namespace

RunConfig parse_config(const std::vector<std::string>& in)
{
    std::vector<std::string> args = in;
    if (args.empty()) args.push_back("evcasimir");
    std::string cpath = config_path(args);
    if (!cpath.empty()) args = merge_config(args, cpath);

    RunConfig cfg;
    CLI::App app{"Particle-number-Casimir toolkit for static Einstein-Vlasov shells"};
    app.fallthrough();
    app.require_subcommand(1, 1);
    std::string config_unused;
    app.add_option("--config", config_unused, "JSON file with flag values (flags win)");
    app.add_option("--k", cfg.params.k, "polytropic exponent in (0, 2]")->required();
    app.add_option("--M", cfg.params.M, "total mass")->capture_default_str();
    app.add_option("--beta", cfg.params.beta, "bound on m/r, in (0, 1/2)")->capture_default_str();
    app.add_option("--sigma0", cfg.params.sigma0, "density cap (default min{1, 3b^3/(4 pi M^2)})");
    app.add_option("--nr", cfg.grid.nr, "radial cells");
    app.add_option("--nv", cfg.grid.nv, "|v| cells");
    app.add_option("--nc", cfg.grid.nc, "angle cells")->capture_default_str();
    app.add_option("--vmax", cfg.grid.vmax, "|v| extent");
    app.add_option("--rmax", cfg.grid.rmax, "radial extent");
    app.add_flag("--adaptive-nodes,!--no-adaptive-nodes", cfg.grid.adaptive_nodes,
                 "insert |v| nodes at machine thresholds");
    app.add_option("--out", cfg.out_dir, "output directory")->capture_default_str();
    app.add_option("--seed", cfg.seed, "seed for randomized runs")->capture_default_str();
    app.add_option("--eps", cfg.eps, "central eps for static")->capture_default_str();
    app.add_option("--eps-lo", cfg.eps_lo, "sweep lower central eps")->capture_default_str();
    app.add_option("--eps-hi", cfg.eps_hi, "sweep upper central eps")->capture_default_str();
    app.add_option("--n", cfg.n, "sweep members")->capture_default_str();
    app.add_option("--b", cfg.b, "witness |v| radius")->capture_default_str();
    app.add_option("--input", cfg.input, "distribution file");
    app.add_option("--ops", cfg.ops, "comma-separated operators")->delimiter(',');
    app.add_option("--P", cfg.P, "tail parameter (default P0)");
    app.add_option("--gap-a", cfg.gap_a, "inner radius of the empty shell");
    app.add_option("--gap-b", cfg.gap_b, "outer radius of the empty shell");
    app.add_option("--R", cfg.R, "restriction radius");
    app.add_flag("--sidecar", cfg.sidecar, "store f values in a .f64 sidecar");
    app.add_option("--init", cfg.init, "flat or static")->capture_default_str();
    app.add_option("--init-R", cfg.init_R, "radius of the flat start profile");
    app.add_option("--max-iter", cfg.max_iter, "minimizer iterations")->capture_default_str();
    app.add_option("--count", cfg.count, "random fields per check suite")->capture_default_str();

    const std::pair<const char*, const char*> cmds[] = {
        {"static", "solve one static polytrope"},
        {"sweep", "solve a family over central eps and write CSV"},
        {"witness", "build the indicator witness and test CBEC"},
        {"evaluate", "functional report for a distribution file"},
        {"rearrange", "apply a chain of machines with traces"},
        {"minimize", "minimize D over the admissible set"},
        {"check", "seeded property suite"}};
    for (const auto& [name, desc] : cmds) app.add_subcommand(name, desc);

    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        cfg.command = "help";
        return cfg;
    } catch (const CLI::ParseError& e) {
        throw UsageError(e.what());
    }
    cfg.command = app.get_subcommands().front()->get_name();
    validate(cfg);
    return cfg;
}

int run(const RunConfig& cfg)
{
    if (cfg.command == "help") return 0;
    fs::create_directories(cfg.out_dir);
    if (cfg.command == "static") return cmd_static(cfg);
    if (cfg.command == "sweep") return cmd_sweep(cfg);
    if (cfg.command == "witness") return cmd_witness(cfg);
    if (cfg.command == "evaluate") return cmd_evaluate(cfg);
    if (cfg.command == "rearrange") return cmd_rearrange(cfg);
    if (cfg.command == "minimize") return cmd_minimize(cfg);
    if (cfg.command == "check") return cmd_check(cfg);
    throw UsageError("unknown command " + cfg.command);
}

int main(int argc, char** argv)
{
    std::vector<std::string> args(argv, argv + argc);
    try {
        return run(parse_config(args));
    } catch (const UsageError& e) {
        print_error(e.kind(), e.what(), 2);
        return 2;
    } catch (const Error& e) {
        print_error(e.kind(), e.what(), 1);
        return 1;
    } catch (const std::exception& e) {
        print_error("Error", e.what(), 1);
        return 1;
    }
}

} // namespace evc::cli
