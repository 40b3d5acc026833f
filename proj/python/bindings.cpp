#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <optional>
#include <string>

#include "dynot/errors.hpp"
#include "dynot/geodesic.hpp"
#include "dynot/io.hpp"
#include "dynot/metrics.hpp"
#include "dynot/transport_energy.hpp"

namespace py = pybind11;
using namespace dynot;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using MaskArray = py::array_t<bool, py::array::c_style | py::array::forcecast>;

DensityGrid to_grid(const Array& a) {
    if (a.ndim() != 2) throw Error(ErrorCode::ShapeMismatch, "expected a 2-D array");
    const auto rows = static_cast<int>(a.shape(0));
    const auto cols = static_cast<int>(a.shape(1));
    return DensityGrid(rows, cols, std::vector<double>(a.data(), a.data() + a.size()));
}

Path to_path(const Array& a) {
    if (a.ndim() != 3) throw Error(ErrorCode::ShapeMismatch, "expected a 3-D array of frames (T+1, n, n)");
    Path path;
    const auto per = static_cast<std::size_t>(a.shape(1) * a.shape(2));
    for (py::ssize_t t = 0; t < a.shape(0); ++t) {
        const double* first = a.data() + static_cast<std::size_t>(t) * per;
        path.emplace_back(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)), std::vector<double>(first, first + per));
    }
    return path;
}

py::array_t<double> from_grid(const Array2D& g) {
    py::array_t<double> out({g.rows(), g.cols()});
    std::memcpy(out.mutable_data(), g.values().data(), g.size() * sizeof(double));
    return out;
}

py::array_t<double> from_stack(const std::vector<Array2D>& stack, int rows, int cols) {
    py::array_t<double> out({static_cast<py::ssize_t>(stack.size()), static_cast<py::ssize_t>(rows),
                             static_cast<py::ssize_t>(cols)});
    double* dst = out.mutable_data();
    for (const auto& g : stack) {
        std::memcpy(dst, g.values().data(), g.size() * sizeof(double));
        dst += g.size();
    }
    return out;
}

ObstacleMask to_mask(const std::optional<MaskArray>& m) {
    if (!m) return {};
    if (m->ndim() != 2 || m->shape(0) != m->shape(1)) throw Error(ErrorCode::ShapeMismatch, "mask must be square");
    const int n = static_cast<int>(m->shape(0));
    std::vector<std::uint8_t> cells(m->data(), m->data() + m->size());
    return ObstacleMask(n, std::move(cells));
}

BoundaryCondition to_bc(const std::string& s) {
    if (s == "dirichlet") return BoundaryCondition::Dirichlet;
    if (s == "neumann") return BoundaryCondition::Neumann;
    if (s == "periodic") return BoundaryCondition::Periodic;
    throw Error(ErrorCode::InvalidConfig, "unknown boundary condition '" + s + "'");
}

EnergyMode to_mode(const std::string& s, double tau, const std::optional<MaskArray>& obstacles) {
    if (s == "balanced") return EnergyMode::balanced(to_mask(obstacles));
    if (s == "unbalanced") return EnergyMode::unbalanced(tau, to_mask(obstacles));
    throw Error(ErrorCode::InvalidConfig, "unknown mode '" + s + "'");
}

PyObject* g_error = nullptr;

}  // namespace

PYBIND11_MODULE(dynot, m) {
    m.doc() = "Dynamic optimal transport path energies and geodesic interpolation";

    g_error = PyErr_NewException("dynot.Error", PyExc_RuntimeError, nullptr);
    m.attr("Error") = py::handle(g_error);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object inst = py::reinterpret_borrow<py::object>(g_error)(e.what());
            inst.attr("code") = std::string(to_string(e.code()));
            inst.attr("slice") = e.slice() ? py::object(py::int_(*e.slice())) : py::object(py::none());
            PyErr_SetObject(g_error, inst.ptr());
        }
    });

    m.def(
        "path_energy",
        [](const Array& frames, const std::string& bc, const std::string& mode, double tau,
           const std::optional<MaskArray>& obstacles) {
            const auto path = to_path(frames);
            const auto rep = path_energy(path, to_bc(bc), to_mode(mode, tau, obstacles));
            py::dict out;
            out["J"] = rep.J;
            out["per_slice_energy"] = rep.per_slice_energy;
            const int n = path.front().rows();
            out["y"] = from_stack(rep.y, n, n);
            return out;
        },
        py::arg("frames"), py::arg("bc") = "dirichlet", py::arg("mode") = "balanced", py::arg("tau") = 1.0,
        py::arg("obstacles") = py::none(),
        "Path energy of frames shaped (T+1, n, n). Returns a dict with J, per_slice_energy and the multipliers y.");

    m.def(
        "path_energy_gradient",
        [](const Array& frames, const std::string& bc, const std::string& mode, double tau,
           const std::optional<MaskArray>& obstacles) {
            const auto path = to_path(frames);
            const auto g = path_energy_gradient(path, to_bc(bc), to_mode(mode, tau, obstacles));
            return from_stack(g, path.front().rows(), path.front().cols());
        },
        py::arg("frames"), py::arg("bc") = "dirichlet", py::arg("mode") = "balanced", py::arg("tau") = 1.0,
        py::arg("obstacles") = py::none(), "Gradient of J with respect to the interior frames, shaped (T-1, n, n).");

    m.def(
        "optimize_path",
        [](const Array& source, const Array& target, int T, const std::string& bc, const std::string& mode,
           double tau, double beta, double eps, int max_iters, const std::optional<MaskArray>& obstacles) {
            SolverConfig cfg;
            cfg.T = T;
            cfg.bc = to_bc(bc);
            cfg.mode = to_mode(mode, tau, obstacles);
            cfg.beta = beta;
            cfg.eps = eps;
            cfg.max_iters = max_iters;
            GeodesicResult r;
            {
                const auto src = to_grid(source);
                const auto tgt = to_grid(target);
                py::gil_scoped_release release;
                r = optimize_path(src, tgt, cfg);
            }
            py::dict out;
            out["path"] = from_stack(r.path, r.path.front().rows(), r.path.front().cols());
            out["J_final"] = r.J_final;
            out["mass_loss_final"] = r.mass_loss_final;
            out["iterations"] = r.iterations;
            out["converged"] = r.converged;
            out["energy_trace"] = r.energy_trace;
            return out;
        },
        py::arg("source"), py::arg("target"), py::arg("T") = 0, py::arg("bc") = "dirichlet",
        py::arg("mode") = "balanced", py::arg("tau") = 1.0, py::arg("beta") = 0.0, py::arg("eps") = 1e-5,
        py::arg("max_iters") = 500, py::arg("obstacles") = py::none(),
        "Minimal-energy path between two densities. T = 0 picks the number of steps from the centroid distance.");

    m.def(
        "preprocess",
        [](const Array& x, double eps, const std::optional<MaskArray>& obstacles, double target_mass) {
            return from_grid(preprocess(to_grid(x), eps, to_mask(obstacles), target_mass));
        },
        py::arg("x"), py::arg("eps") = 1e-5, py::arg("obstacles") = py::none(), py::arg("target_mass") = 0.0,
        "Threshold at eps, pin obstacle cells to eps and optionally rescale to target_mass.");

    m.def(
        "choose_T", [](const Array& a, const Array& b) { return choose_T(to_grid(a), to_grid(b)); }, py::arg("source"),
        py::arg("target"), "Time steps from the centroid distance, clamped to [4, 30].");

    m.def(
        "ssim", [](const Array& a, const Array& b) { return ssim(to_grid(a), to_grid(b)); }, py::arg("a"), py::arg("b"),
        "Gaussian-window SSIM (11x11, sigma 1.5) of two images in [0, 1].");

    m.def(
        "ssim_sequence",
        [](const Array& frames) {
            const auto s = ssim_sequence(to_path(frames));
            return py::make_tuple(s.mean, s.std, s.per_pair);
        },
        py::arg("frames"), "(mean, std, per_pair) of adjacent-frame SSIM.");

    m.def(
        "read_image", [](const std::string& file) { return from_grid(io::read_image(file)); }, py::arg("file"),
        "Read a P2/P5 PGM as values in [0, 1].");
    m.def(
        "write_image", [](const Array& x, const std::string& file) { io::write_image(to_grid(x), file); },
        py::arg("x"), py::arg("file"), "Write an 8-bit P5 PGM.");
}
