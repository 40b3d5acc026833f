#pragma once

#include <cstdint>
#include <vector>

#include "dynot/grid.hpp"
#include "dynot/transport_energy.hpp"

namespace dynot {

/// Metric of the descent step. DensityScaled moves each cell by
/// -rho * (g - mean), which keeps steps small where there is little mass.
enum class StepMetric { Euclidean, DensityScaled };

struct SolverConfig {
    int T = 0;  // 0 selects choose_T(source, target)
    double eps = 1e-5;
    BoundaryCondition bc = BoundaryCondition::Dirichlet;
    EnergyMode mode;
    double beta = 0.0;  // mass-loss weight
    int max_iters = 500;
    double step0 = 1.0;
    double tol_rel = 1e-6;
    std::uint64_t seed = 0;
    StepMetric metric = StepMetric::DensityScaled;
    SolveOptions solve;
};

struct GeodesicResult {
    Path path;
    double J_final = 0.0;
    double mass_loss_final = 0.0;
    int iterations = 0;
    bool converged = false;
    /// Objective J + beta * MassLoss after each accepted step, starting with
    /// the initial path. Nonincreasing.
    std::vector<double> energy_trace;
};

/// ceil of the distance between the mass centroids, clamped to [4, 30].
int choose_T(const DensityGrid& source, const DensityGrid& target);

/// Linear blend (1 - t/T) source + (t/T) target, thresholded at eps.
Path init_path(const DensityGrid& source, const DensityGrid& target, int T, double eps);

/// Threshold at eps and pin obstacle cells to eps. With target_mass > 0 the
/// free cells are then rescaled about eps so that the total equals target_mass.
DensityGrid preprocess(const DensityGrid& x, double eps, const ObstacleMask& obstacles = {}, double target_mass = 0.0);

/// Minimizes J + beta * MassLoss over the interior slices by projected
/// gradient descent with Armijo backtracking. Endpoints are thresholded and
/// obstacle-clamped but otherwise left untouched; in balanced mode they must
/// carry equal mass.
GeodesicResult optimize_path(const DensityGrid& source, const DensityGrid& target, const SolverConfig& cfg);

}  // namespace dynot
