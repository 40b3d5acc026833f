#pragma once

#include <cstdint>
#include <vector>

#include "dynot/grid.hpp"
#include "dynot/transport_energy.hpp"

namespace dynot {

/// Densities drawn uniformly from [0.2, 1.0]; with equal_mass every slice is
/// rescaled to the mass of slice 0.
Path random_density_path(int n, int T, std::uint64_t seed, bool equal_mass);

/// Central differences of path_energy over every interior cell. Per-slice
/// mass checks are disabled because each probe moves mass by +-step.
std::vector<Array2D> finite_difference_gradient(const Path& path, BoundaryCondition bc, const EnergyMode& mode,
                                                double step);

struct GradientCheck {
    double max_relative_error = 0.0;  // max |analytic - fd| / max |fd|
    std::vector<Array2D> analytic;
    std::vector<Array2D> numeric;
};

/// Compares path_energy_gradient against finite differences. `corruption`
/// is added to every analytic entry (harness self-test).
GradientCheck check_gradient(const Path& path, BoundaryCondition bc, const EnergyMode& mode, double step = 1e-5,
                             double corruption = 0.0);

}  // namespace dynot
