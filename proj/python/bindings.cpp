#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "evcasimir/checks.hpp"
#include "evcasimir/errors.hpp"
#include "evcasimir/io.hpp"
#include "evcasimir/minimizer.hpp"
#include "evcasimir/random_fields.hpp"
#include "evcasimir/rearrangement.hpp"
#include "evcasimir/static_solver.hpp"

namespace py = pybind11;
using namespace evc;

namespace {

py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

py::array_t<double> values(const DistributionFunction& f)
{
    const PhaseGrid& g = f.grid;
    py::array_t<double> a({g.nr(), g.nv(), g.nc()});
    std::copy(f.f.begin(), f.f.end(), a.mutable_data());
    return a;
}

DistributionFunction from_values(const PhaseGrid& g, py::array_t<double, py::array::c_style | py::array::forcecast> a)
{
    if (a.ndim() != 3 || std::size_t(a.shape(0)) != g.nr() || std::size_t(a.shape(1)) != g.nv() ||
        std::size_t(a.shape(2)) != g.nc())
        throw GridMismatchError("values must have shape (nr, nv, nc) of the grid");
    return DistributionFunction(g, std::vector<double>(a.data(), a.data() + a.size()));
}

py::tuple machine(const MachineResult& r) { return py::make_tuple(r.first, to_py(to_json(r.second))); }

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Energy-Casimir functional for spherically symmetric Einstein-Vlasov matter";

    static py::exception<Error> base(m, "Error");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::set_error(base, (std::string(e.kind()) + ": " + e.what()).c_str());
        }
    });

    py::class_<AdmissibleParams>(m, "AdmissibleParams")
        .def(py::init([](double M, double beta, double sigma0, double k) {
                 AdmissibleParams p;
                 p.M = M;
                 p.beta = beta;
                 p.sigma0 = sigma0;
                 p.k = k;
                 return p.validated();
             }),
             py::arg("M") = 1.0, py::arg("beta") = 0.3, py::arg("sigma0") = 0.0, py::arg("k") = 1.0)
        .def_readonly("M", &AdmissibleParams::M)
        .def_readonly("beta", &AdmissibleParams::beta)
        .def_readonly("sigma0", &AdmissibleParams::sigma0)
        .def_readonly("k", &AdmissibleParams::k)
        .def_property_readonly("P0", &AdmissibleParams::P0)
        .def_property_readonly("c_beta", &AdmissibleParams::c_beta)
        .def_property_readonly("sigma_M", &AdmissibleParams::sigma_M)
        .def("to_dict", [](const AdmissibleParams& p) { return to_py(to_json(p)); });

    py::class_<PhaseGrid>(m, "PhaseGrid")
        .def_readonly("r", &PhaseGrid::r)
        .def_readonly("v", &PhaseGrid::v)
        .def_readonly("c", &PhaseGrid::c)
        .def_property_readonly("shape", [](const PhaseGrid& g) { return py::make_tuple(g.nr(), g.nv(), g.nc()); });
    m.def("make_grid", &make_grid, py::arg("r_max"), py::arg("nr"), py::arg("v_max"), py::arg("nv"),
          py::arg("nc") = 1, py::arg("r_nodes") = std::vector<double>{}, py::arg("v_nodes") = std::vector<double>{});

    py::class_<DistributionFunction>(m, "DistributionFunction")
        .def(py::init(&from_values), py::arg("grid"), py::arg("values"))
        .def_readonly("grid", &DistributionFunction::grid)
        .def_property_readonly("values", &values)
        .def("density", &density);

    m.def("evaluate", [](const DistributionFunction& f, double k) { return to_py(to_json(evaluate(f, k))); },
          py::arg("f"), py::arg("k"));
    m.def("check_admissible",
          [](const DistributionFunction& f, const AdmissibleParams& p) { return to_py(to_json(check_admissible(f, p))); });
    m.def("random_field",
          [](std::uint64_t seed, const AdmissibleParams& p, double rho_cap) {
              std::mt19937_64 rng(seed);
              return random_field(rng, RandomFieldSpec{}, p.M, p.beta, rho_cap);
          },
          py::arg("seed"), py::arg("params"), py::arg("rho_cap") = 1.0);

    m.def("cap_excess", [](const DistributionFunction& f, double k) { return machine(cap_excess(f, k)); });
    m.def("tail_rearrange", [](const DistributionFunction& f, double P, const AdmissibleParams& p) {
        return machine(tail_rearrange(f, P, p));
    });
    m.def("improve_tail", [](const DistributionFunction& f, const AdmissibleParams& p) {
        return machine(improve_tail(f, p));
    });
    m.def("remove_gap", [](const DistributionFunction& f, double a, double b, const AdmissibleParams& p) {
        return machine(remove_gap(f, a, b, p));
    });
    m.def("restrict_rescale",
          [](const DistributionFunction& f, double R, double k) { return machine(restrict_rescale(f, R, k)); });

    m.def("integrate_static",
          [](double k, double central_eps) {
              StaticSolution s = integrate_static(k, central_eps);
              py::dict d = to_py(static_metadata(s));
              d["r"] = s.profile.r;
              d["rho"] = s.profile.rho;
              d["p"] = s.profile.p;
              d["m"] = s.profile.m;
              d["mu"] = s.profile.mu;
              return d;
          },
          py::arg("k"), py::arg("central_eps"));
    m.def("sweep_csv", [](double k, double lo, double hi, std::size_t n) { return sweep_csv(sweep_family(k, lo, hi, n)); },
          py::arg("k"), py::arg("eps_lo"), py::arg("eps_hi"), py::arg("n"));
    m.def("cbec_witness",
          [](double k, double M, double sigma0, double b) {
              Witness w = cbec_witness(k, M, sigma0, b);
              py::dict d;
              d["f"] = w.f;
              d["A"] = w.A;
              d["a"] = w.a;
              d["D_closed"] = w.D_closed;
              d["exceeds_mass"] = w.exceeds_mass;
              return d;
          },
          py::arg("k"), py::arg("M"), py::arg("sigma0"), py::arg("b"));

    m.def("minimize",
          [](const AdmissibleParams& p, const PhaseGrid& g, const std::vector<double>& rho0, std::size_t max_iter) {
              MinimizeOptions opt;
              opt.max_iter = max_iter;
              MinimizerState s = minimize(p, g, rho0, opt);
              py::dict d = to_py(to_json(s));
              d["diagnostics"] = to_py(to_json(convergence_diagnostics(s)));
              return d;
          },
          py::arg("params"), py::arg("grid"), py::arg("rho0"), py::arg("max_iter") = 400);
    m.def("flat_profile", &flat_profile, py::arg("grid"), py::arg("M"), py::arg("R"));
    m.def("small_mass_saturation_bound", &small_mass_saturation_bound);

    m.def("property_suite",
          [](const AdmissibleParams& p, std::uint64_t seed, std::size_t count) {
              return to_py(property_suite(p, seed, count));
          },
          py::arg("params"), py::arg("seed") = 0, py::arg("count") = 20);
}
