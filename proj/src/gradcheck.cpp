#include "dynot/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace dynot {

Path random_density_path(int n, int T, std::uint64_t seed, bool equal_mass) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(0.2, 1.0);
    Path path;
    for (int t = 0; t <= T; ++t) {
        DensityGrid g(n, n);
        for (double& v : g.values()) v = dist(rng);
        path.push_back(std::move(g));
    }
    if (equal_mass) {
        const double m0 = path.front().sum();
        for (auto& g : path) g = normalize_mass(g, m0);
    }
    return path;
}

std::vector<Array2D> finite_difference_gradient(const Path& path, BoundaryCondition bc, const EnergyMode& mode,
                                                double step) {
    SolveOptions opts;
    opts.mass_rtol = std::numeric_limits<double>::infinity();
    std::vector<Array2D> grad;
    for (std::size_t t = 1; t + 1 < path.size(); ++t) {
        // J depends on rho_t only through the steps t-1 -> t and t -> t+1.
        Path local{path[t - 1], path[t], path[t + 1]};
        Array2D g(path[t].rows(), path[t].cols());
        for (std::size_t k = 0; k < g.size(); ++k) {
            const double orig = local[1][k];
            local[1][k] = orig + step;
            const double up = path_energy(local, bc, mode, opts).J;
            local[1][k] = orig - step;
            const double down = path_energy(local, bc, mode, opts).J;
            local[1][k] = orig;
            g[k] = (up - down) / (2.0 * step);
        }
        grad.push_back(std::move(g));
    }
    return grad;
}

GradientCheck check_gradient(const Path& path, BoundaryCondition bc, const EnergyMode& mode, double step,
                             double corruption) {
    GradientCheck out;
    out.analytic = path_energy_gradient(path, bc, mode);
    for (auto& g : out.analytic)
        for (double& v : g.values()) v += corruption;
    out.numeric = finite_difference_gradient(path, bc, mode, step);

    double diff = 0.0;
    double scale = 0.0;
    for (std::size_t t = 0; t < out.numeric.size(); ++t) {
        for (std::size_t k = 0; k < out.numeric[t].size(); ++k) {
            diff = std::max(diff, std::abs(out.analytic[t][k] - out.numeric[t][k]));
            scale = std::max(scale, std::abs(out.numeric[t][k]));
        }
    }
    out.max_relative_error = scale > 0.0 ? diff / scale : diff;
    return out;
}

}  // namespace dynot
