#include "dynot/transport_energy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include "dynot/errors.hpp"

namespace dynot {

EnergyMode EnergyMode::balanced(ObstacleMask obstacles) {
    EnergyMode m;
    m.obstacles = std::move(obstacles);
    return m;
}

EnergyMode EnergyMode::unbalanced(double tau, ObstacleMask obstacles) {
    if (!(tau > 0.0)) throw Error(ErrorCode::InvalidConfig, "tau must be positive");
    EnergyMode m;
    m.kind = Kind::Unbalanced;
    m.tau = tau;
    m.obstacles = std::move(obstacles);
    return m;
}

namespace {

void require_positive(const DensityGrid& rho) {
    for (std::size_t k = 0; k < rho.size(); ++k) {
        if (!(rho[k] > 0.0))
            throw Error(ErrorCode::NonPositiveDensity,
                        "density must be positive, found " + std::to_string(rho[k]) + " at cell " + std::to_string(k));
    }
}

void require_square(const Array2D& a, int n, const char* what) {
    if (a.rows() != n || a.cols() != n)
        throw Error(ErrorCode::ShapeMismatch, std::string(what) + " must be " + std::to_string(n) + "x" +
                                                  std::to_string(n));
}

int find_root(std::vector<int>& parent, int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
        parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
        x = parent[static_cast<std::size_t>(x)];
    }
    return x;
}

double norm1(const Eigen::VectorXd& v) { return v.cwiseAbs().sum(); }

}  // namespace

WeightField compute_weights(const DensityGrid& rho) {
    if (!rho.is_square()) throw Error(ErrorCode::ShapeMismatch, "density grid must be square");
    require_positive(rho);
    const int n = rho.rows();
    WeightField w{Array2D(std::max(n - 1, 0), n), Array2D(n, std::max(n - 1, 0))};
    for (int i = 0; i + 1 < n; ++i)
        for (int j = 0; j < n; ++j) w.w1(i, j) = 2.0 / (rho(i, j) + rho(i + 1, j));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j + 1 < n; ++j) w.w2(i, j) = 2.0 / (rho(i, j) + rho(i, j + 1));
    return w;
}

struct SliceOperator::Impl {
    Eigen::SparseMatrix<double> pinned;
    std::vector<int> pins;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
};

SliceOperator::~SliceOperator() = default;
SliceOperator::SliceOperator(SliceOperator&&) noexcept = default;
SliceOperator& SliceOperator::operator=(SliceOperator&&) noexcept = default;

SliceOperator::SliceOperator(const DensityGrid& rho, BoundaryCondition bc, const EnergyMode& mode, SolverKind solver)
    : n_(rho.rows()), bc_(bc), solver_(solver), impl_(std::make_unique<Impl>()) {
    if (!rho.is_square() || n_ < 1) throw Error(ErrorCode::ShapeMismatch, "density grid must be square");
    require_positive(rho);
    if (!mode.obstacles.empty() && mode.obstacles.n() != n_)
        throw Error(ErrorCode::ShapeMismatch, "obstacle mask size differs from the density grid");

    const int cells = n_ * n_;
    density_mass_ = rho.sum();
    faces_ = active_faces(n_, bc);
    conductance_.assign(faces_.size(), 0.0);

    std::vector<double> diag(static_cast<std::size_t>(cells), 0.0);
    std::vector<Eigen::Triplet<double>> offdiag;
    offdiag.reserve(faces_.size() * 2);
    std::vector<int> parent(static_cast<std::size_t>(cells));
    std::iota(parent.begin(), parent.end(), 0);
    std::vector<char> grounded_cell(static_cast<std::size_t>(cells), mode.is_unbalanced() ? 1 : 0);

    for (std::size_t k = 0; k < faces_.size(); ++k) {
        const Face& f = faces_[k];
        if (face_blocked(f, mode.obstacles)) continue;
        double u = 0.0;
        if (f.lower >= 0 && f.upper >= 0)
            u = 0.5 * (rho[static_cast<std::size_t>(f.lower)] + rho[static_cast<std::size_t>(f.upper)]);
        else
            u = rho[static_cast<std::size_t>(f.lower >= 0 ? f.lower : f.upper)];
        conductance_[k] = u;

        if (f.lower >= 0) diag[static_cast<std::size_t>(f.lower)] += u;
        if (f.upper >= 0) diag[static_cast<std::size_t>(f.upper)] += u;
        if (f.lower >= 0 && f.upper >= 0) {
            offdiag.emplace_back(f.lower, f.upper, -u);
            offdiag.emplace_back(f.upper, f.lower, -u);
            const int a = find_root(parent, f.lower);
            const int b = find_root(parent, f.upper);
            if (a != b) parent[static_cast<std::size_t>(a)] = b;
        } else {
            grounded_cell[static_cast<std::size_t>(f.lower >= 0 ? f.lower : f.upper)] = 1;
        }
    }
    if (mode.is_unbalanced()) {
        for (int c = 0; c < cells; ++c) diag[static_cast<std::size_t>(c)] += rho[static_cast<std::size_t>(c)] / mode.tau;
    }

    // Label components and mark the floating ones.
    component_.assign(static_cast<std::size_t>(cells), -1);
    std::vector<int> root_label(static_cast<std::size_t>(cells), -1);
    std::vector<char> grounded;
    for (int c = 0; c < cells; ++c) {
        const int r = find_root(parent, c);
        auto& label = root_label[static_cast<std::size_t>(r)];
        if (label < 0) {
            label = static_cast<int>(grounded.size());
            grounded.push_back(0);
        }
        component_[static_cast<std::size_t>(c)] = label;
        if (grounded_cell[static_cast<std::size_t>(c)]) grounded[static_cast<std::size_t>(label)] = 1;
    }
    floating_.resize(grounded.size());
    for (std::size_t k = 0; k < grounded.size(); ++k) floating_[k] = grounded[k] ? 0 : 1;

    // One pinned cell per floating component: the one with the largest diagonal.
    std::vector<int> pin_of(floating_.size(), -1);
    for (int c = 0; c < cells; ++c) {
        const int comp = component_[static_cast<std::size_t>(c)];
        if (!floating_[static_cast<std::size_t>(comp)]) continue;
        int& p = pin_of[static_cast<std::size_t>(comp)];
        if (p < 0 || diag[static_cast<std::size_t>(c)] > diag[static_cast<std::size_t>(p)]) p = c;
    }
    std::vector<char> is_pinned(static_cast<std::size_t>(cells), 0);
    for (int p : pin_of) {
        if (p >= 0) {
            impl_->pins.push_back(p);
            is_pinned[static_cast<std::size_t>(p)] = 1;
        }
    }

    std::vector<Eigen::Triplet<double>> full = offdiag;
    std::vector<Eigen::Triplet<double>> pinned;
    pinned.reserve(offdiag.size() + static_cast<std::size_t>(cells));
    for (const auto& t : offdiag) {
        if (!is_pinned[static_cast<std::size_t>(t.row())] && !is_pinned[static_cast<std::size_t>(t.col())])
            pinned.push_back(t);
    }
    for (int c = 0; c < cells; ++c) {
        const double d = diag[static_cast<std::size_t>(c)];
        full.emplace_back(c, c, d);
        pinned.emplace_back(c, c, is_pinned[static_cast<std::size_t>(c)] ? 1.0 : d);
    }
    matrix_.resize(cells, cells);
    matrix_.setFromTriplets(full.begin(), full.end());
    impl_->pinned.resize(cells, cells);
    impl_->pinned.setFromTriplets(pinned.begin(), pinned.end());

    if (solver_ == SolverKind::Direct) {
        impl_->ldlt.compute(impl_->pinned);
        if (impl_->ldlt.info() != Eigen::Success)
            throw Error(ErrorCode::SolverDivergence, "sparse factorization of the slice operator failed");
    }
}

Eigen::VectorXd SliceOperator::solve_pinned(const Eigen::VectorXd& b, const SolveOptions& opts) const {
    Eigen::VectorXd rhs = b;
    for (int p : impl_->pins) rhs[p] = 0.0;
    if (solver_ == SolverKind::Direct) return impl_->ldlt.solve(rhs);

    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>>
        cg;
    cg.setTolerance(opts.tol);
    cg.setMaxIterations(opts.max_iterations > 0 ? opts.max_iterations : 20 * n_ * n_);
    cg.compute(impl_->pinned);
    Eigen::VectorXd y = cg.solve(rhs);
    if (cg.info() != Eigen::Success)
        throw Error(ErrorCode::SolverDivergence, "conjugate gradient stopped after " +
                                                     std::to_string(cg.iterations()) + " iterations at residual " +
                                                     std::to_string(cg.error()));
    return y;
}

SliceOperator assemble_operator(const DensityGrid& rho, BoundaryCondition bc, const EnergyMode& mode,
                                SolverKind solver) {
    return SliceOperator(rho, bc, mode, solver);
}

Array2D solve_slice(const SliceOperator& op, const Array2D& b, const SolveOptions& opts) {
    const int n = op.n();
    require_square(b, n, "right-hand side");
    const auto cells = static_cast<Eigen::Index>(n) * n;
    Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(b.values().data(), cells);

    const auto comp = op.component();
    const auto comps = static_cast<std::size_t>(op.component_count());
    std::vector<double> comp_sum(comps, 0.0);
    std::vector<double> comp_size(comps, 0.0);
    for (Eigen::Index c = 0; c < cells; ++c) {
        const auto k = static_cast<std::size_t>(comp[static_cast<std::size_t>(c)]);
        comp_sum[k] += rhs[c];
        comp_size[k] += 1.0;
    }

    const double allowed = opts.mass_rtol * (op.density_mass() + norm1(rhs));
    double floating_total = 0.0;
    bool inconsistent = false;
    double worst = 0.0;
    for (std::size_t k = 0; k < comps; ++k) {
        if (!op.floating(static_cast<int>(k))) continue;
        floating_total += comp_sum[k];
        if (std::abs(comp_sum[k]) > allowed) {
            inconsistent = true;
            worst = std::max(worst, std::abs(comp_sum[k]));
        }
    }
    if (inconsistent) {
        if (std::abs(floating_total) > allowed)
            throw Error(ErrorCode::MassMismatch, "mass changes by " + std::to_string(floating_total) +
                                                     " between consecutive slices (allowed " +
                                                     std::to_string(allowed) + ")");
        throw Error(ErrorCode::DisconnectedDomain,
                    "a disconnected region gains or loses mass " + std::to_string(worst) + " with no admissible flux");
    }

    for (Eigen::Index c = 0; c < cells; ++c) {
        const auto k = static_cast<std::size_t>(comp[static_cast<std::size_t>(c)]);
        if (op.floating(static_cast<int>(k))) rhs[c] -= comp_sum[k] / comp_size[k];
    }

    Array2D out(n, n);
    const double rhs_norm = rhs.norm();
    if (rhs_norm == 0.0) return out;

    const auto& A = op.matrix();
    Eigen::VectorXd y = op.solve_pinned(rhs, opts);
    Eigen::VectorXd r = rhs - A * y;
    for (int refine = 0; refine < 3 && r.norm() > opts.tol * rhs_norm; ++refine) {
        y += op.solve_pinned(r, opts);
        r = rhs - A * y;
    }
    if (!(r.norm() <= opts.tol * rhs_norm))
        throw Error(ErrorCode::SolverDivergence,
                    "relative residual " + std::to_string(r.norm() / rhs_norm) + " above tolerance");

    std::vector<double> comp_mean(comps, 0.0);
    for (Eigen::Index c = 0; c < cells; ++c) comp_mean[static_cast<std::size_t>(comp[static_cast<std::size_t>(c)])] += y[c];
    for (std::size_t k = 0; k < comps; ++k) comp_mean[k] = op.floating(static_cast<int>(k)) ? comp_mean[k] / comp_size[k] : 0.0;
    for (Eigen::Index c = 0; c < cells; ++c)
        out[static_cast<std::size_t>(c)] = y[c] - comp_mean[static_cast<std::size_t>(comp[static_cast<std::size_t>(c)])];
    return out;
}

StaggeredField recover_momentum(const SliceOperator& op, const Array2D& y) {
    require_square(y, op.n(), "multiplier field");
    StaggeredField m(op.n());
    const auto faces = op.faces();
    const auto u = op.conductance();
    for (std::size_t k = 0; k < faces.size(); ++k) {
        if (u[k] == 0.0) continue;
        const Face& f = faces[k];
        const double lo = f.lower >= 0 ? y[static_cast<std::size_t>(f.lower)] : 0.0;
        const double up = f.upper >= 0 ? y[static_cast<std::size_t>(f.upper)] : 0.0;
        face_value(m, f) = u[k] * (lo - up);
    }
    return m;
}

namespace {

void check_path(const Path& path, const EnergyMode& mode) {
    if (path.size() < 2) throw Error(ErrorCode::ShapeMismatch, "a path needs at least two slices");
    const int n = path.front().rows();
    for (const auto& slice : path) require_square(slice, n, "every path slice");
    if (!mode.obstacles.empty() && mode.obstacles.n() != n)
        throw Error(ErrorCode::ShapeMismatch, "obstacle mask size differs from the path");
}

Array2D slice_difference(const DensityGrid& a, const DensityGrid& b) {
    Array2D out(a.rows(), a.cols());
    for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] - b[k];
    return out;
}

struct SliceSolution {
    SliceOperator op;
    Array2D y;
};

EnergyWithGradient evaluate(const Path& path, BoundaryCondition bc, const EnergyMode& mode, const SolveOptions& opts,
                            bool with_gradient) {
    check_path(path, mode);
    const int T = static_cast<int>(path.size()) - 1;
    const int n = path.front().rows();

    EnergyWithGradient out;
    EnergyReport& rep = out.report;
    rep.per_slice_energy.resize(static_cast<std::size_t>(T));
    rep.y.reserve(static_cast<std::size_t>(T));
    rep.momenta.reserve(static_cast<std::size_t>(T));

    std::vector<SliceOperator> ops;
    ops.reserve(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
        try {
            const auto& rho = path[static_cast<std::size_t>(t)];
            SliceOperator op(rho, bc, mode, opts.solver);
            const Array2D b = slice_difference(rho, path[static_cast<std::size_t>(t) + 1]);
            Array2D y = solve_slice(op, b, opts);
            double e = 0.0;
            for (std::size_t k = 0; k < b.size(); ++k) e += b[k] * y[k];
            rep.per_slice_energy[static_cast<std::size_t>(t)] = e;
            rep.momenta.push_back(recover_momentum(op, y));
            if (mode.is_unbalanced()) {
                Array2D s(n, n);
                for (std::size_t k = 0; k < s.size(); ++k) s[k] = rho[k] / mode.tau * y[k];
                rep.source.push_back(std::move(s));
            }
            rep.y.push_back(std::move(y));
            ops.push_back(std::move(op));
        } catch (const Error& e) {
            if (e.slice()) throw;
            throw e.with_slice(t);
        }
    }
    // Ascending-t reduction keeps totals reproducible.
    for (double e : rep.per_slice_energy) rep.J += e;

    if (!with_gradient) return out;

    out.gradient.reserve(static_cast<std::size_t>(std::max(T - 1, 0)));
    for (int t = 1; t < T; ++t) {
        const auto& y = rep.y[static_cast<std::size_t>(t)];
        const auto& y_prev = rep.y[static_cast<std::size_t>(t) - 1];
        const auto& op = ops[static_cast<std::size_t>(t)];
        Array2D g(n, n);
        for (std::size_t k = 0; k < g.size(); ++k) g[k] = 2.0 * y[k] - 2.0 * y_prev[k];

        // dJ/du_f = -(grad y)_f^2, and u_f depends on its cells with weight 1/2
        // (or 1 for a single-cell outer face).
        const auto faces = op.faces();
        const auto u = op.conductance();
        for (std::size_t k = 0; k < faces.size(); ++k) {
            if (u[k] == 0.0) continue;
            const Face& f = faces[k];
            const double lo = f.lower >= 0 ? y[static_cast<std::size_t>(f.lower)] : 0.0;
            const double up = f.upper >= 0 ? y[static_cast<std::size_t>(f.upper)] : 0.0;
            const double sq = (lo - up) * (lo - up);
            if (f.lower >= 0 && f.upper >= 0) {
                g[static_cast<std::size_t>(f.lower)] -= 0.5 * sq;
                g[static_cast<std::size_t>(f.upper)] -= 0.5 * sq;
            } else {
                g[static_cast<std::size_t>(f.lower >= 0 ? f.lower : f.upper)] -= sq;
            }
        }
        if (mode.is_unbalanced()) {
            for (std::size_t k = 0; k < g.size(); ++k) g[k] -= y[k] * y[k] / mode.tau;
        }
        out.gradient.push_back(std::move(g));
    }
    return out;
}

}  // namespace

EnergyReport path_energy(const Path& path, BoundaryCondition bc, const EnergyMode& mode, const SolveOptions& opts) {
    return evaluate(path, bc, mode, opts, false).report;
}

std::vector<Array2D> path_energy_gradient(const Path& path, BoundaryCondition bc, const EnergyMode& mode,
                                          const SolveOptions& opts) {
    return evaluate(path, bc, mode, opts, true).gradient;
}

EnergyWithGradient path_energy_and_gradient(const Path& path, BoundaryCondition bc, const EnergyMode& mode,
                                            const SolveOptions& opts) {
    return evaluate(path, bc, mode, opts, true);
}

double scheduled_mass(int t, int T, double mass_source, double mass_target) {
    const double s = static_cast<double>(t) / T;
    return (1.0 - s) * mass_source + s * mass_target;
}

double mass_loss(const Path& path, double mass_source, double mass_target) {
    const int T = static_cast<int>(path.size()) - 1;
    double loss = 0.0;
    for (int t = 1; t < T; ++t)
        loss += std::abs(mass(path[static_cast<std::size_t>(t)]) - scheduled_mass(t, T, mass_source, mass_target));
    return loss;
}

std::vector<Array2D> mass_loss_gradient(const Path& path, double mass_source, double mass_target) {
    const int T = static_cast<int>(path.size()) - 1;
    std::vector<Array2D> grad;
    for (int t = 1; t < T; ++t) {
        const auto& rho = path[static_cast<std::size_t>(t)];
        const double diff = mass(rho) - scheduled_mass(t, T, mass_source, mass_target);
        const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        Array2D g(rho.rows(), rho.cols());
        for (std::size_t k = 0; k < g.size(); ++k) g[k] = sign * (rho[k] > 0.0 ? 1.0 : (rho[k] < 0.0 ? -1.0 : 0.0));
        grad.push_back(std::move(g));
    }
    return grad;
}

}  // namespace dynot
