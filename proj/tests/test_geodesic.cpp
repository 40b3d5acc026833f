#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "dynot/errors.hpp"
#include "dynot/geodesic.hpp"
#include "fixtures.hpp"

using namespace dynot;
using fixtures::gaussian_bump;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error raised");
    return ErrorCode::InvalidConfig;
}

}  // namespace

TEST_CASE("choose_T") {
    const auto x = gaussian_bump(64, 20.0, 20.0, 2.0);
    CHECK(choose_T(x, x) == 4);
    CHECK(choose_T(x, gaussian_bump(64, 20.0, 30.0, 2.0)) == 10);
    CHECK(choose_T(x, gaussian_bump(64, 26.0, 28.0, 2.0)) == 10);
    CHECK(choose_T(x, gaussian_bump(64, 20.0, 32.5, 2.0)) == 13);

    const auto far_a = gaussian_bump(80, 15.0, 15.0, 2.0);
    const auto far_b = gaussian_bump(80, 45.0, 55.0, 2.0);
    CHECK(choose_T(far_a, far_b) == 30);

    CHECK(code_of([&] { choose_T(Array2D(8, 8), x); }) == ErrorCode::ZeroMass);
}

TEST_CASE("init_path") {
    const auto x = gaussian_bump(8, 3.0, 3.0, 1.0);
    for (const auto& s : init_path(x, x, 2, 1e-5)) CHECK(s == threshold(x, 1e-5));

    const auto y = gaussian_bump(8, 4.0, 5.0, 1.5);
    const auto path = init_path(x, y, 2, 1e-5);
    REQUIRE(path.size() == 3);
    CHECK(path[1].sum() == doctest::Approx(1.0).epsilon(1e-3));
    for (const auto& s : path) CHECK(s.min() >= 1e-5);

    CHECK(code_of([&] { init_path(x, gaussian_bump(6, 2, 2, 1), 2, 1e-5); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("preprocess pins obstacles and rescales to the target mass") {
    ObstacleMask mask(6);
    mask.set(2, 2, true);
    mask.set(2, 3, true);
    const auto x = gaussian_bump(6, 2.5, 2.5, 1.5, 3.0);
    const auto p = preprocess(x, 1e-5, mask, 2.0);
    CHECK(p(2, 2) == 1e-5);
    CHECK(p(2, 3) == 1e-5);
    CHECK(p.min() >= 1e-5);
    CHECK(p.sum() == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(code_of([&] { preprocess(x, 1e-5, ObstacleMask(5)); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("optimize_path on identical endpoints stays constant") {
    const auto x = gaussian_bump(8, 3.0, 4.0, 1.5);
    SolverConfig cfg;
    cfg.T = 4;
    const auto r = optimize_path(x, x, cfg);
    CHECK(r.converged);
    CHECK(r.iterations <= 1);
    CHECK(r.J_final == 0.0);
    for (const auto& s : r.path) CHECK(s == r.path.front());
}

TEST_CASE("optimize_path: monotone trace, endpoint fidelity, mass schedule") {
    const double eps = 1e-5;
    const auto a = preprocess(gaussian_bump(12, 3.0, 3.0, 1.5), eps, {}, 1.0);
    const auto b = preprocess(gaussian_bump(12, 8.0, 7.0, 1.5), eps, {}, 1.0);
    SolverConfig cfg;
    cfg.T = 5;
    cfg.max_iters = 60;
    for (auto bc : {BoundaryCondition::Dirichlet, BoundaryCondition::Neumann, BoundaryCondition::Periodic}) {
        CAPTURE(static_cast<int>(bc));
        cfg.bc = bc;
        const auto r = optimize_path(a, b, cfg);
        CHECK(r.path.front() == preprocess(a, eps));
        CHECK(r.path.back() == preprocess(b, eps));
        for (std::size_t k = 1; k < r.energy_trace.size(); ++k) CHECK(r.energy_trace[k] <= r.energy_trace[k - 1]);
        CHECK(r.energy_trace.back() < 0.8 * r.energy_trace.front());
        for (const auto& s : r.path) {
            CHECK(s.min() >= eps);
            CHECK(s.sum() == doctest::Approx(1.0).epsilon(1e-12));
        }
        CHECK(r.J_final == doctest::Approx(path_energy(r.path, bc, cfg.mode).J).epsilon(1e-12));
    }
}

TEST_CASE("optimize_path: unbalanced mode with unequal endpoint masses") {
    const auto a = gaussian_bump(10, 3.0, 3.0, 1.5, 1.0);
    const auto b = gaussian_bump(10, 6.0, 6.0, 1.5, 2.0);
    SolverConfig cfg;
    cfg.T = 4;
    cfg.max_iters = 40;
    CHECK(code_of([&] { optimize_path(a, b, cfg); }) == ErrorCode::MassMismatch);

    cfg.mode = EnergyMode::unbalanced(1.0);
    const auto r = optimize_path(a, b, cfg);
    for (std::size_t k = 1; k < r.energy_trace.size(); ++k) CHECK(r.energy_trace[k] <= r.energy_trace[k - 1]);
    CHECK(r.energy_trace.back() < r.energy_trace.front());

    // A mass-loss penalty pulls slice masses towards the linear schedule.
    cfg.beta = 5.0;
    const auto penalized = optimize_path(a, b, cfg);
    CHECK(penalized.mass_loss_final <= r.mass_loss_final + 1e-12);
    for (std::size_t k = 1; k < penalized.energy_trace.size(); ++k)
        CHECK(penalized.energy_trace[k] <= penalized.energy_trace[k - 1]);
}

TEST_CASE("optimize_path: obstacle cells carry no flux") {
    const int n = 12;
    ObstacleMask wall(n);
    for (int j = 0; j < n; ++j)
        if (j < 5 || j > 7) wall.set(6, j, true);
    const double eps = 1e-5;
    const auto a = preprocess(gaussian_bump(n, 2.5, 3.0, 1.2), eps, wall, 1.0);
    const auto b = preprocess(gaussian_bump(n, 9.5, 8.0, 1.2), eps, wall, 1.0);
    SolverConfig cfg;
    cfg.T = 6;
    cfg.max_iters = 40;
    cfg.mode = EnergyMode::balanced(wall);
    const auto r = optimize_path(a, b, cfg);
    const auto rep = path_energy(r.path, cfg.bc, cfg.mode);
    for (const auto& m : rep.momenta)
        for (const Face& f : active_faces(n, cfg.bc))
            if (face_blocked(f, wall)) CHECK(face_value(m, f) == 0.0);
    for (const auto& s : r.path)
        for (int j = 0; j < n; ++j)
            if (wall(6, j)) CHECK(s(6, j) == eps);
}

TEST_CASE("optimize_path rejects invalid configurations") {
    const auto x = gaussian_bump(6, 2.0, 2.0, 1.0);
    SolverConfig cfg;
    cfg.max_iters = 0;
    CHECK(code_of([&] { optimize_path(x, x, cfg); }) == ErrorCode::InvalidConfig);
    cfg = {};
    cfg.eps = 0.0;
    CHECK(code_of([&] { optimize_path(x, x, cfg); }) == ErrorCode::InvalidConfig);
    cfg = {};
    cfg.beta = -1.0;
    CHECK(code_of([&] { optimize_path(x, x, cfg); }) == ErrorCode::InvalidConfig);
    cfg = {};
    cfg.T = -2;
    CHECK(code_of([&] { optimize_path(x, x, cfg); }) == ErrorCode::InvalidConfig);
    CHECK(code_of([&] { optimize_path(x, gaussian_bump(7, 2, 2, 1), SolverConfig{}); }) == ErrorCode::ShapeMismatch);
}
