#include "dynot/geodesic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dynot/errors.hpp"

namespace dynot {

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kStepFloor = 1e-12;
constexpr int kMinSteps = 4;
constexpr int kMaxSteps = 30;

struct Centroid {
    double row;
    double col;
};

Centroid centroid(const DensityGrid& x) {
    const double total = x.sum();
    if (!(total > 0.0)) throw Error(ErrorCode::ZeroMass, "centroid of a grid with zero mass");
    double r = 0.0;
    double c = 0.0;
    for (int i = 0; i < x.rows(); ++i) {
        for (int j = 0; j < x.cols(); ++j) {
            r += i * x(i, j);
            c += j * x(i, j);
        }
    }
    return {r / total, c / total};
}

void validate(const SolverConfig& cfg) {
    if (cfg.T < 0) throw Error(ErrorCode::InvalidConfig, "T must be positive (or 0 for automatic)");
    if (!(cfg.eps > 0.0)) throw Error(ErrorCode::InvalidConfig, "eps must be positive");
    if (cfg.max_iters < 1) throw Error(ErrorCode::InvalidConfig, "max_iters must be at least 1");
    if (!(cfg.beta >= 0.0)) throw Error(ErrorCode::InvalidConfig, "beta must be nonnegative");
    if (!(cfg.step0 > 0.0)) throw Error(ErrorCode::InvalidConfig, "step0 must be positive");
    if (cfg.mode.is_unbalanced() && !(cfg.mode.tau > 0.0)) throw Error(ErrorCode::InvalidConfig, "tau must be positive");
}

// Feasible set of one interior slice: rho >= eps, obstacle cells == eps and,
// in balanced mode, a fixed total mass.
class SliceProjection {
public:
    SliceProjection(double eps, const ObstacleMask& obstacles, bool fix_mass)
        : eps_(eps), obstacles_(obstacles), fix_mass_(fix_mass) {}

    void apply(DensityGrid& x, double target_mass) const {
        for (std::size_t k = 0; k < x.size(); ++k) x[k] = obstacles_.at(k) ? eps_ : std::max(x[k], eps_);
        if (!fix_mass_) return;
        double excess = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k)
            if (!obstacles_.at(k)) excess += x[k] - eps_;
        const double wanted = target_mass - eps_ * static_cast<double>(x.size());
        if (!(excess > 0.0) || !(wanted > 0.0)) return;
        const double scale = wanted / excess;
        for (std::size_t k = 0; k < x.size(); ++k)
            if (!obstacles_.at(k)) x[k] = eps_ + (x[k] - eps_) * scale;
    }

    // Removes the components of g that leave the feasible set's tangent space:
    // obstacle cells are frozen and balanced slices keep their mass.
    void tangent(Array2D& g) const {
        double mean = 0.0;
        std::size_t free = 0;
        for (std::size_t k = 0; k < g.size(); ++k) {
            if (obstacles_.at(k)) {
                g[k] = 0.0;
            } else {
                mean += g[k];
                ++free;
            }
        }
        if (!fix_mass_ || free == 0) return;
        mean /= static_cast<double>(free);
        for (std::size_t k = 0; k < g.size(); ++k)
            if (!obstacles_.at(k)) g[k] -= mean;
    }

private:
    double eps_;
    const ObstacleMask& obstacles_;
    bool fix_mass_;
};

struct Objective {
    double value = 0.0;
    double J = 0.0;
    double mass_loss = 0.0;
    std::vector<Array2D> gradient;
};

}  // namespace

int choose_T(const DensityGrid& source, const DensityGrid& target) {
    const auto a = centroid(source);
    const auto b = centroid(target);
    const double d = std::hypot(a.row - b.row, a.col - b.col);
    // Centroids of exactly displaced bumps can land a few ulp above an integer.
    const int steps = static_cast<int>(std::ceil(d - 1e-9));
    return std::clamp(steps, kMinSteps, kMaxSteps);
}

Path init_path(const DensityGrid& source, const DensityGrid& target, int T, double eps) {
    if (source.rows() != target.rows() || source.cols() != target.cols())
        throw Error(ErrorCode::ShapeMismatch, "source and target differ in shape");
    if (T < 1) throw Error(ErrorCode::InvalidConfig, "T must be at least 1");
    Path path;
    path.reserve(static_cast<std::size_t>(T) + 1);
    for (int t = 0; t <= T; ++t) {
        const double s = static_cast<double>(t) / T;
        DensityGrid slice(source.rows(), source.cols());
        for (std::size_t k = 0; k < slice.size(); ++k) slice[k] = source[k] + s * (target[k] - source[k]);
        path.push_back(threshold(slice, eps));
    }
    path.front() = threshold(source, eps);
    path.back() = threshold(target, eps);
    return path;
}

DensityGrid preprocess(const DensityGrid& x, double eps, const ObstacleMask& obstacles, double target_mass) {
    if (obstacles.n() != 0 && obstacles.n() != x.rows())
        throw Error(ErrorCode::ShapeMismatch, "obstacle mask size differs from the image");
    DensityGrid out = threshold(x, eps);
    SliceProjection projection(eps, obstacles, target_mass > 0.0);
    projection.apply(out, target_mass);
    return out;
}

GeodesicResult optimize_path(const DensityGrid& source, const DensityGrid& target, const SolverConfig& cfg) {
    validate(cfg);
    if (!source.is_square() || source.rows() != target.rows() || source.cols() != target.cols())
        throw Error(ErrorCode::ShapeMismatch, "source and target must be square grids of the same size");

    const ObstacleMask& obstacles = cfg.mode.obstacles;
    const DensityGrid src = preprocess(source, cfg.eps, obstacles);
    const DensityGrid tgt = preprocess(target, cfg.eps, obstacles);
    const double mass_src = mass(src);
    const double mass_tgt = mass(tgt);
    const bool balanced = !cfg.mode.is_unbalanced();
    if (balanced && std::abs(mass_src - mass_tgt) > cfg.solve.mass_rtol * std::max(mass_src, mass_tgt))
        throw Error(ErrorCode::MassMismatch, "balanced transport needs equal endpoint masses (source " +
                                                 std::to_string(mass_src) + ", target " + std::to_string(mass_tgt) +
                                                 ")");

    const int T = cfg.T > 0 ? cfg.T : choose_T(src, tgt);
    GeodesicResult result;
    result.path = init_path(src, tgt, T, cfg.eps);
    result.path.front() = src;
    result.path.back() = tgt;

    const SliceProjection projection(cfg.eps, obstacles, balanced);
    const auto project = [&](Path& path) {
        for (int t = 1; t < T; ++t)
            projection.apply(path[static_cast<std::size_t>(t)], scheduled_mass(t, T, mass_src, mass_tgt));
    };
    const auto evaluate = [&](const Path& path) {
        Objective obj;
        auto eg = path_energy_and_gradient(path, cfg.bc, cfg.mode, cfg.solve);
        obj.J = eg.report.J;
        obj.gradient = std::move(eg.gradient);
        obj.mass_loss = mass_loss(path, mass_src, mass_tgt);
        if (cfg.beta > 0.0) {
            const auto gm = mass_loss_gradient(path, mass_src, mass_tgt);
            for (std::size_t t = 0; t < gm.size(); ++t)
                for (std::size_t k = 0; k < gm[t].size(); ++k) obj.gradient[t][k] += cfg.beta * gm[t][k];
        }
        obj.value = obj.J + cfg.beta * obj.mass_loss;
        for (auto& g : obj.gradient) projection.tangent(g);
        return obj;
    };

    // The blend of feasible endpoints is already feasible, so no initial projection.
    Objective current = evaluate(result.path);
    result.energy_trace.push_back(current.value);

    double step = cfg.step0;
    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        double gnorm2 = 0.0;
        for (const auto& g : current.gradient)
            for (double v : g.values()) gnorm2 += v * v;
        if (current.value <= 0.0 || gnorm2 == 0.0) {
            result.converged = true;
            break;
        }

        std::vector<Array2D> direction = current.gradient;
        if (cfg.metric == StepMetric::DensityScaled) {
            for (int t = 1; t < T; ++t) {
                auto& d = direction[static_cast<std::size_t>(t) - 1];
                const auto& rho = result.path[static_cast<std::size_t>(t)];
                double weighted = 0.0;
                double total = 0.0;
                for (std::size_t k = 0; k < d.size(); ++k) {
                    if (obstacles.at(k)) continue;
                    weighted += rho[k] * d[k];
                    total += rho[k];
                }
                const double shift = balanced ? weighted / total : 0.0;
                for (std::size_t k = 0; k < d.size(); ++k) d[k] = obstacles.at(k) ? 0.0 : rho[k] * (d[k] - shift);
            }
        }

        bool accepted = false;
        Path trial;
        Objective next;
        while (step >= kStepFloor) {
            trial = result.path;
            for (int t = 1; t < T; ++t) {
                auto& slice = trial[static_cast<std::size_t>(t)];
                const auto& d = direction[static_cast<std::size_t>(t) - 1];
                for (std::size_t k = 0; k < slice.size(); ++k) slice[k] -= step * d[k];
            }
            project(trial);
            double decrease = 0.0;
            for (int t = 1; t < T; ++t) {
                const auto& g = current.gradient[static_cast<std::size_t>(t) - 1];
                const auto& a = result.path[static_cast<std::size_t>(t)];
                const auto& b = trial[static_cast<std::size_t>(t)];
                for (std::size_t k = 0; k < g.size(); ++k) decrease += g[k] * (a[k] - b[k]);
            }
            if (decrease > 0.0) {
                next = evaluate(trial);
                if (next.value <= current.value - kArmijo * decrease) {
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if (!accepted) break;

        const double previous = current.value;
        result.path = std::move(trial);
        current = std::move(next);
        result.energy_trace.push_back(current.value);
        result.iterations = iter + 1;
        step *= 2.0;
        if ((previous - current.value) <= cfg.tol_rel * previous) {
            result.converged = true;
            break;
        }
    }

    result.J_final = current.J;
    result.mass_loss_final = current.mass_loss;
    return result;
}

}  // namespace dynot
