#include "evcasimir/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "evcasimir/errors.hpp"

namespace fs = std::filesystem;

namespace evc {

std::string fmt_double(double x)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

json to_json(const AdmissibleParams& p)
{
    json j;
    j["M"] = p.M;
    j["beta"] = p.beta;
    j["sigma0"] = p.sigma0;
    j["k"] = p.k;
    if (p.sigma0 > 0) {
        j["c_beta"] = p.c_beta();
        j["P0"] = p.P0();
        j["sigma_M"] = p.sigma_M();
    }
    return j;
}

AdmissibleParams params_from_json(const json& j)
{
    AdmissibleParams p;
    p.M = j.value("M", p.M);
    p.beta = j.value("beta", p.beta);
    p.sigma0 = j.value("sigma0", p.sigma0);
    p.k = j.value("k", p.k);
    return p;
}

json to_json(const FunctionalReport& r)
{
    return json{{"D", r.D},     {"M", r.M},     {"M0", r.M0},
                {"E_b", r.E_b}, {"E_Cb", r.E_Cb}, {"Psi", r.Psi},
                {"max_two_m_over_r", r.max_two_m_over_r}};
}

FunctionalReport report_from_json(const json& j)
{
    FunctionalReport r;
    r.D = j.at("D").get<double>();
    r.M = j.at("M").get<double>();
    r.M0 = j.at("M0").get<double>();
    r.E_b = j.at("E_b").get<double>();
    r.E_Cb = j.at("E_Cb").get<double>();
    r.Psi = j.at("Psi").get<double>();
    r.max_two_m_over_r = j.at("max_two_m_over_r").get<double>();
    return r;
}

json to_json(const AdmissibilityReport& r)
{
    return json{{"mass", r.mass},
                {"max_rho", r.max_rho},
                {"max_two_m_over_r", r.max_two_m_over_r},
                {"mass_ok", r.mass_ok},
                {"cap_ok", r.cap_ok},
                {"nonneg_ok", r.nonneg_ok},
                {"horizon_ok", r.horizon_ok},
                {"admissible", r.admissible},
                {"in_tilde_A", r.in_tilde_A}};
}

json to_json(const MachineTrace& t)
{
    json info = json::object();
    for (const auto& [key, val] : t.info) info[key] = val;
    return json{{"op", t.op},         {"D_before", t.D_before},
                {"D_after", t.D_after}, {"rho_max_dev", t.rho_max_dev},
                {"P_used", t.P_used},   {"case", t.branch},
                {"info", info}};
}

json to_json(const CbecVerdict& v)
{
    return json{{"cbec", v.cbec}, {"E_b_positive", v.E_b_positive}, {"E_Cb", v.E_Cb},
                {"E_b", v.E_b}};
}

json to_json(const DiagnosticsReport& d)
{
    return json{{"u_cv", d.u_cv},
                {"u_cells", d.u_cells},
                {"u_mean", d.u_mean},
                {"v_support_ok", d.v_support_ok},
                {"S0", d.S0},
                {"N", d.N},
                {"saturation_bound", d.saturation_bound},
                {"saturation_applicable", d.saturation_applicable},
                {"saturation_violated", d.saturation_violated},
                {"saturated_radius", d.saturated_radius},
                {"R0", d.R0},
                {"kkt_gap", d.kkt_gap}};
}

json to_json(const MinimizerState& s)
{
    return json{{"params", to_json(s.params)},
                {"r_edges", s.grid.r},
                {"rho", s.rho},
                {"eps", s.eps},
                {"h", s.h},
                {"D", s.D},
                {"iter", s.iter},
                {"moves", s.moves},
                {"kkt_gap", s.kkt_gap},
                {"last_dD", s.last_dD},
                {"converged", s.converged},
                {"D_history", s.D_history},
                {"residuals",
                 {{"vi_residual", s.residuals.vi_residual}, {"U_cv", s.residuals.U_cv}}}};
}

json static_metadata(const StaticSolution& s)
{
    return json{{"k", s.k},
                {"central_eps", s.central_eps},
                {"C", s.C},
                {"R0", s.R0},
                {"M", s.M},
                {"D", s.report.D},
                {"compactness", s.compactness},
                {"mu_shift", s.mu_shift},
                {"mass_identity_integral", s.mass_identity_integral},
                {"report", to_json(s.report)}};
}

namespace {

void put_le(std::string& out, double x)
{
    auto u = std::bit_cast<std::uint64_t>(x);
    if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
    char b[8];
    std::memcpy(b, &u, 8);
    out.append(b, 8);
}

double get_le(const char* p)
{
    std::uint64_t u;
    std::memcpy(&u, p, 8);
    if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
    return std::bit_cast<double>(u);
}

std::vector<double> edges_from(const json& j, const char* key)
{
    if (!j.contains(key) || !j[key].is_array()) throw IoError(std::string("grid.") + key + " missing");
    return j[key].get<std::vector<double>>();
}

} // namespace

void write_distribution(const std::string& path, const DistributionFunction& f, double k,
                        const AdmissibleParams& p, bool sidecar)
{
    json j;
    j["grid"] = {{"r", f.grid.r}, {"v", f.grid.v}, {"c", f.grid.c}};
    j["k"] = k;
    j["params"] = to_json(p);
    if (sidecar) {
        fs::path side = fs::path(path);
        side += ".f64";
        std::string raw;
        raw.reserve(8 * f.f.size());
        for (double x : f.f) put_le(raw, x);
        write_atomic(side.string(), raw);
        j["f_file"] = side.filename().string();
    } else {
        j["f"] = f.f;
    }
    write_atomic(path, j.dump(1) + "\n");
}

DistributionFile read_distribution(const std::string& path)
{
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw IoError(path + ": " + e.what());
    }
    if (!j.contains("grid")) throw IoError(path + ": grid missing");
    const json& g = j["grid"];
    PhaseGrid grid(edges_from(g, "r"), edges_from(g, "v"), edges_from(g, "c"));
    std::vector<double> vals;
    if (j.contains("f")) {
        vals = j["f"].get<std::vector<double>>();
    } else if (j.contains("f_file")) {
        fs::path side = fs::path(path).parent_path() / j["f_file"].get<std::string>();
        std::string raw = read_file(side.string());
        if (raw.size() % 8 != 0) throw IoError(side.string() + ": truncated");
        vals.resize(raw.size() / 8);
        for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = get_le(raw.data() + 8 * i);
    } else {
        throw IoError(path + ": neither f nor f_file present");
    }
    if (vals.size() != grid.size())
        throw IoError(path + ": expected " + std::to_string(grid.size()) + " values, got " +
                      std::to_string(vals.size()));
    DistributionFile out;
    out.f = DistributionFunction(std::move(grid), std::move(vals));
    out.k = j.value("k", 1.0);
    if (j.contains("params")) out.params = params_from_json(j["params"]);
    out.params.k = out.k;
    return out;
}

std::string profile_csv(const RadialProfile& p)
{
    std::string s = "r,rho,m,lambda,mu,p\n";
    auto col = [](const std::vector<double>& v, std::size_t i) {
        return i < v.size() ? fmt_double(v[i]) : std::string();
    };
    for (std::size_t i = 0; i < p.r.size(); ++i) {
        s += fmt_double(p.r[i]) + ',' + col(p.rho, i) + ',' + col(p.m, i) + ',' +
             col(p.lam, i) + ',' + col(p.mu, i) + ',' + col(p.p, i) + '\n';
    }
    return s;
}

RadialProfile read_profile_csv(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "r,rho,m,lambda,mu,p")
        throw IoError("profile csv: bad header");
    RadialProfile p;
    std::vector<double>* cols[6] = {&p.r, &p.rho, &p.m, &p.lam, &p.mu, &p.p};
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::size_t start = 0;
        for (int c = 0; c < 6; ++c) {
            std::size_t end = line.find(',', start);
            std::string cell = line.substr(start, end == std::string::npos ? end : end - start);
            if (!cell.empty()) {
                double x = 0;
                auto res = std::from_chars(cell.data(), cell.data() + cell.size(), x);
                if (res.ec != std::errc()) throw IoError("profile csv: bad number '" + cell + "'");
                cols[c]->push_back(x);
            }
            if (end == std::string::npos) break;
            start = end + 1;
        }
    }
    return p;
}

void write_atomic(const std::string& path, const std::string& content)
{
    fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw IoError("rename to " + path + ": " + ec.message());
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace evc
