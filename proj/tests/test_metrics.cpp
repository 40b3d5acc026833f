#include <cmath>
#include <random>

#include "doctest.h"
#include "dynot/errors.hpp"
#include "dynot/geodesic.hpp"
#include "dynot/metrics.hpp"
#include "fixtures.hpp"

using namespace dynot;
using fixtures::gaussian_bump;

namespace {

DensityGrid random_image(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    DensityGrid x(n, n);
    for (double& v : x.values()) v = u(rng);
    return x;
}

}  // namespace

TEST_CASE("ssim of identical images is one") {
    std::mt19937_64 rng(11);
    for (int n : {4, 11, 16, 23}) {
        const auto x = random_image(rng, n);
        CHECK(std::abs(ssim(x, x) - 1.0) <= 1e-12);
    }
}

TEST_CASE("ssim is symmetric and bounded") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        const auto a = random_image(rng, 14);
        const auto b = random_image(rng, 14);
        const double ab = ssim(a, b);
        CHECK(std::abs(ab - ssim(b, a)) <= 1e-14);
        CHECK(ab >= -1.0);
        CHECK(ab <= 1.0);
        CHECK(ab < 1.0);
    }
}

TEST_CASE("ssim of two constant images") {
    // Zero variances leave only the luminance term:
    // (2 * 0.2 * 0.6 + C1) / (0.2^2 + 0.6^2 + C1) with C1 = 1e-4.
    const double expected = 0.2401 / 0.4001;
    CHECK(expected == doctest::Approx(0.6000999750062483).epsilon(1e-15));
    CHECK(std::abs(ssim(DensityGrid(16, 16, 0.2), DensityGrid(16, 16, 0.6)) - expected) < 1e-14);
    CHECK(std::abs(ssim(DensityGrid(5, 5, 0.2), DensityGrid(5, 5, 0.6)) - expected) < 1e-14);
}

TEST_CASE("ssim rejects mismatched shapes") {
    try {
        ssim(DensityGrid(4, 4), DensityGrid(5, 5));
        FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ShapeMismatch);
    }
}

TEST_CASE("ssim_sequence") {
    const auto x = gaussian_bump(12, 5.0, 5.0, 2.0);
    const auto constant = ssim_sequence(Path(5, x));
    CHECK(constant.per_pair.size() == 4);
    CHECK(std::abs(constant.mean - 1.0) < 1e-12);
    CHECK(constant.std == 0.0);

    const auto single = ssim_sequence(Path{x, gaussian_bump(12, 6.0, 5.0, 2.0)});
    CHECK(single.per_pair.size() == 1);
    CHECK(single.std == 0.0);

    // Time reversal permutes the pairs, so the mean survives.
    std::mt19937_64 rng(3);
    Path path;
    for (int t = 0; t < 5; ++t) path.push_back(random_image(rng, 12));
    const auto forward = ssim_sequence(path);
    const auto backward = ssim_sequence(Path(path.rbegin(), path.rend()));
    CHECK(forward.mean == doctest::Approx(backward.mean).epsilon(1e-14));
}

TEST_CASE("smooth geodesic has steadier ssim than a teleporting path") {
    const double eps = 1e-5;
    const auto a = preprocess(gaussian_bump(16, 4.0, 4.0, 1.5), eps, {}, 1.0);
    const auto b = preprocess(gaussian_bump(16, 11.0, 10.0, 1.5), eps, {}, 1.0);
    SolverConfig cfg;
    cfg.T = 8;
    cfg.max_iters = 150;
    const auto r = optimize_path(a, b, cfg);

    Path abrupt(r.path.size(), a);
    abrupt.back() = b;
    const auto smooth = ssim_sequence(r.path);
    const auto jump = ssim_sequence(abrupt);
    CHECK(smooth.std < jump.std);
    CHECK(smooth.std < 0.05);
}

TEST_CASE("w2_estimate") {
    const auto x = gaussian_bump(8, 3.0, 3.0, 1.5);
    CHECK(w2_estimate(path_energy(Path(3, x), BoundaryCondition::Dirichlet, EnergyMode::balanced()), 2) == 0.0);

    const Path path{gaussian_bump(8, 2.5, 3.0, 1.3), gaussian_bump(8, 3.5, 3.5, 1.3), gaussian_bump(8, 4.5, 4.0, 1.3)};
    Path doubled = path;
    for (auto& s : doubled)
        for (double& v : s.values()) v *= 2.0;
    const double w = w2_estimate(path_energy(path, BoundaryCondition::Dirichlet, EnergyMode::balanced()), 2);
    const double w_doubled =
        w2_estimate(path_energy(doubled, BoundaryCondition::Dirichlet, EnergyMode::balanced()), 2);
    CHECK(w_doubled == doctest::Approx(2.0 * w).epsilon(1e-12));

    Path transposed;
    for (const auto& s : path) transposed.push_back(s.transposed());
    CHECK(w2_estimate(path_energy(transposed, BoundaryCondition::Dirichlet, EnergyMode::balanced()), 2) ==
          doctest::Approx(w).epsilon(1e-12));
}
