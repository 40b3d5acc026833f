#pragma once

#include <memory>
#include <span>
#include <vector>

#include <Eigen/SparseCore>

#include "dynot/grid.hpp"

namespace dynot {

/// Balanced transport, or unbalanced transport with a source term penalized
/// by tau / rho. Either may carry an obstacle mask; momentum on every face
/// touching an obstacle cell is forced to zero.
struct EnergyMode {
    enum class Kind { Balanced, Unbalanced };

    Kind kind = Kind::Balanced;
    double tau = 1.0;
    ObstacleMask obstacles;

    static EnergyMode balanced(ObstacleMask obstacles = {});
    static EnergyMode unbalanced(double tau, ObstacleMask obstacles = {});

    bool is_unbalanced() const noexcept { return kind == Kind::Unbalanced; }
};

/// Interior face weights 2 / (rho_a + rho_b). w1 is (n-1) x n: entry (k, j)
/// sits between cells (k, j) and (k+1, j). w2 is n x (n-1).
struct WeightField {
    Array2D w1;
    Array2D w2;
};

WeightField compute_weights(const DensityGrid& rho);

enum class SolverKind { Direct, ConjugateGradient };

struct SolveOptions {
    SolverKind solver = SolverKind::Direct;
    double tol = 1e-10;          // relative residual ||A y - b|| / ||b||
    double mass_rtol = 1e-6;     // balanced solvability, relative to slice mass + ||b||_1
    int max_iterations = 0;      // iterative solver cap; 0 means 20 n^2
};

/// Per-slice operator A = div Diag(u) div^T (+ Diag(rho) / tau when
/// unbalanced), u being the face conductance (rho_a + rho_b) / 2. Neumann
/// outer faces use the single adjacent cell; blocked faces get u = 0.
///
/// Cells are grouped into components connected through faces with u > 0.
/// A component with no grounding term (no outer Neumann face, no source
/// term) is floating: A is singular on it with the constants as nullspace.
class SliceOperator {
public:
    SliceOperator(const DensityGrid& rho, BoundaryCondition bc, const EnergyMode& mode,
                  SolverKind solver = SolverKind::Direct);
    ~SliceOperator();
    SliceOperator(SliceOperator&&) noexcept;
    SliceOperator& operator=(SliceOperator&&) noexcept;

    int n() const noexcept { return n_; }
    BoundaryCondition bc() const noexcept { return bc_; }
    SolverKind solver() const noexcept { return solver_; }
    double density_mass() const noexcept { return density_mass_; }

    const Eigen::SparseMatrix<double>& matrix() const noexcept { return matrix_; }
    std::span<const Face> faces() const noexcept { return faces_; }
    /// Conductance per entry of faces().
    std::span<const double> conductance() const noexcept { return conductance_; }

    std::span<const int> component() const noexcept { return component_; }
    int component_count() const noexcept { return static_cast<int>(floating_.size()); }
    bool floating(int comp) const { return floating_[static_cast<std::size_t>(comp)] != 0; }

    /// Solve A y = b on the pinned system (see solve_slice for the contract).
    Eigen::VectorXd solve_pinned(const Eigen::VectorXd& b, const SolveOptions& opts) const;

private:
    struct Impl;

    int n_ = 0;
    BoundaryCondition bc_ = BoundaryCondition::Dirichlet;
    SolverKind solver_ = SolverKind::Direct;
    double density_mass_ = 0.0;
    Eigen::SparseMatrix<double> matrix_;
    std::vector<Face> faces_;
    std::vector<double> conductance_;
    std::vector<int> component_;
    std::vector<char> floating_;
    std::unique_ptr<Impl> impl_;
};

SliceOperator assemble_operator(const DensityGrid& rho, BoundaryCondition bc, const EnergyMode& mode,
                                SolverKind solver = SolverKind::Direct);

/// Solves A y = b. On floating components b must sum to zero within
/// mass_rtol (MassMismatch otherwise); the residual mean is removed and y is
/// returned with zero mean there. Throws SolverDivergence when the relative
/// residual stays above tol.
Array2D solve_slice(const SliceOperator& op, const Array2D& b, const SolveOptions& opts = {});

/// Optimal momentum for multipliers y: m = Diag(u) grad y.
StaggeredField recover_momentum(const SliceOperator& op, const Array2D& y);

struct EnergyReport {
    double J = 0.0;
    std::vector<double> per_slice_energy;
    std::vector<Array2D> y;
    std::vector<StaggeredField> momenta;
    std::vector<Array2D> source;  // unbalanced only
};

/// J = sum_t b_t^T A_t^{-1} b_t with b_t = rho_t - rho_{t+1} and A_t built
/// from rho_t. No 1/2 prefactor.
EnergyReport path_energy(const Path& path, BoundaryCondition bc, const EnergyMode& mode,
                         const SolveOptions& opts = {});

/// dJ/d rho_t for the interior slices t = 1..T-1 (endpoints are constants).
std::vector<Array2D> path_energy_gradient(const Path& path, BoundaryCondition bc, const EnergyMode& mode,
                                          const SolveOptions& opts = {});

struct EnergyWithGradient {
    EnergyReport report;
    std::vector<Array2D> gradient;
};

EnergyWithGradient path_energy_and_gradient(const Path& path, BoundaryCondition bc, const EnergyMode& mode,
                                            const SolveOptions& opts = {});

/// sum_{t=1}^{T-1} |Mass(rho_t) - ((1 - t/T) mass_source + (t/T) mass_target)|
double mass_loss(const Path& path, double mass_source, double mass_target);

/// Subgradient of mass_loss for the interior slices.
std::vector<Array2D> mass_loss_gradient(const Path& path, double mass_source, double mass_target);

/// Scheduled mass of slice t.
double scheduled_mass(int t, int T, double mass_source, double mass_target);

}  // namespace dynot
