#include <cmath>
#include <random>

#include "doctest.h"
#include "dynot/errors.hpp"
#include "dynot/grid.hpp"
#include "oracle/dense_oracle.hpp"

using namespace dynot;

namespace {

constexpr BoundaryCondition kAllBcs[] = {BoundaryCondition::Dirichlet, BoundaryCondition::Neumann,
                                         BoundaryCondition::Periodic};

// A random field that is zero wherever the boundary condition has no unknown.
StaggeredField random_admissible(std::mt19937_64& rng, int n, BoundaryCondition bc) {
    std::normal_distribution<double> dist;
    StaggeredField m(n);
    for (const Face& f : active_faces(n, bc)) face_value(m, f) = dist(rng);
    return m;
}

Array2D random_array(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> dist;
    Array2D a(n, n);
    for (double& v : a.values()) v = dist(rng);
    return a;
}

double dot(const Array2D& a, const Array2D& b) {
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
    return acc;
}

}  // namespace

TEST_CASE("divergence of a zero field is zero") {
    for (auto bc : kAllBcs) {
        const auto out = divergence(StaggeredField(5), bc);
        CHECK(out == Array2D(5, 5));
    }
}

TEST_CASE("divergence single-entry stencil") {
    StaggeredField m(2);
    m.m2(0, 1) = 1.0;
    const auto out = divergence(m, BoundaryCondition::Dirichlet);
    CHECK(out(0, 0) == 1.0);
    CHECK(out(0, 1) == -1.0);
    CHECK(out(1, 0) == 0.0);
    CHECK(out(1, 1) == 0.0);
}

TEST_CASE("dirichlet divergence telescopes to zero total") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const auto m = random_admissible(rng, 8, BoundaryCondition::Dirichlet);
        CHECK(std::abs(divergence(m, BoundaryCondition::Dirichlet).sum()) < 1e-14);
    }
}

TEST_CASE("divergence rejects inconsistent staggered shapes") {
    StaggeredField m(4);
    m.m2 = Array2D(3, 5);
    CHECK_THROWS_AS(divergence(m, BoundaryCondition::Dirichlet), Error);
    try {
        divergence(m, BoundaryCondition::Dirichlet);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ShapeMismatch);
    }
}

TEST_CASE("face_gradient of a constant vanishes and div(grad c) = 0") {
    const Array2D c(6, 6, 3.25);
    for (auto bc : kAllBcs) {
        const auto g = face_gradient(c, bc);
        if (bc == BoundaryCondition::Neumann) {
            // Outer Neumann faces see the outside as zero; interior faces vanish.
            for (const Face& f : active_faces(6, bc))
                if (f.lower >= 0 && f.upper >= 0) CHECK(face_value(g, f) == 0.0);
        } else {
            CHECK(g.m1 == Array2D(7, 6));
            CHECK(g.m2 == Array2D(6, 7));
            CHECK(divergence(g, bc) == Array2D(6, 6));
        }
    }
}

TEST_CASE("face_gradient is the adjoint of divergence") {
    std::mt19937_64 rng(2024);
    for (auto bc : kAllBcs) {
        double worst = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            const auto m = random_admissible(rng, 8, bc);
            const auto y = random_array(rng, 8);
            const double lhs = dot(divergence(m, bc), y);
            const double rhs = m.dot(face_gradient(y, bc));
            worst = std::max(worst, std::abs(lhs - rhs) / std::max(std::abs(lhs), 1.0));
        }
        CHECK(worst < 1e-13);
    }
}

TEST_CASE("interior face gradient sign convention") {
    Array2D y(3, 3);
    y(0, 1) = 2.0;
    y(1, 1) = 5.0;
    const auto g = face_gradient(y, BoundaryCondition::Dirichlet);
    CHECK(g.m1(1, 1) == doctest::Approx(2.0 - 5.0));
}

TEST_CASE("periodic face_gradient matches the transpose of the dense periodic divergence") {
    const int n = 4;
    Array2D y(n, n);
    y(0, 0) = 1.0;
    const auto g = face_gradient(y, BoundaryCondition::Periodic);

    const Eigen::MatrixXd D = oracle::full_divergence_matrix(n, BoundaryCondition::Periodic);
    Eigen::VectorXd yv = Eigen::VectorXd::Zero(n * n);
    yv[0] = 1.0;
    const Eigen::VectorXd expected = D.transpose() * yv;

    Eigen::VectorXd got(expected.size());
    for (std::size_t k = 0; k < g.m1.size(); ++k) got[static_cast<Eigen::Index>(k)] = g.m1[k];
    for (std::size_t k = 0; k < g.m2.size(); ++k) got[static_cast<Eigen::Index>(g.m1.size() + k)] = g.m2[k];
    CHECK((got - expected).cwiseAbs().maxCoeff() == 0.0);

    // Wrap-around faces between row 3 and row 0, and column 3 and column 0.
    CHECK(g.m1(0, 0) == -1.0);
    CHECK(g.m2(0, 0) == -1.0);
    CHECK(g.m1(1, 0) == 1.0);
    CHECK(g.m2(0, 1) == 1.0);
}

TEST_CASE("downsample block means") {
    CHECK(downsample(Array2D(4, 4, 1.0), 2) == Array2D(2, 2, 1.0));

    Array2D two(2, 2, std::vector<double>{0.1, 0.2, 0.3, 0.4});
    CHECK(downsample(two, 2) == two);

    Array2D spike(4, 4);
    spike(0, 0) = 4.0;
    const auto out = downsample(spike, 2);
    CHECK(out(0, 0) == 1.0);
    CHECK(out(0, 1) == 0.0);
    CHECK(out(1, 0) == 0.0);
    CHECK(out(1, 1) == 0.0);

    try {
        downsample(spike, 3);
        FAIL("expected IncompatibleSize");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::IncompatibleSize);
    }
}

TEST_CASE("downsample composes") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    Array2D x(16, 16);
    for (double& v : x.values()) v = dist(rng);
    const auto twice = downsample(downsample(x, 8), 4);
    const auto once = downsample(x, 4);
    for (std::size_t k = 0; k < once.size(); ++k) CHECK(twice[k] == doctest::Approx(once[k]).epsilon(1e-14));
}

TEST_CASE("threshold clamps from below") {
    Array2D x(2, 2, std::vector<double>{0.0, 0.5, -0.1, 1.0});
    const auto out = threshold(x, 1e-5);
    CHECK(out(0, 0) == 1e-5);
    CHECK(out(0, 1) == 0.5);
    CHECK(out(1, 0) == 1e-5);
    CHECK(out(1, 1) == 1.0);
    CHECK(threshold(out, 1e-5) == out);

    Array2D above(2, 2, 0.3);
    CHECK(threshold(above, 1e-5) == above);
}

TEST_CASE("normalize_mass rescales to the requested total") {
    Array2D x(2, 2, std::vector<double>{0.2, 0.4, 0.6, 0.8});
    const auto half = normalize_mass(x, 1.0);
    for (std::size_t k = 0; k < x.size(); ++k) CHECK(half[k] == doctest::Approx(x[k] / 2.0));
    CHECK(std::abs(half.sum() - 1.0) < 1e-12);

    const auto unit = normalize_mass(half, 1.0);
    for (std::size_t k = 0; k < x.size(); ++k) CHECK(unit[k] == doctest::Approx(half[k]).epsilon(1e-15));

    CHECK(normalize_mass(Array2D(2, 2, 0.5), 4.0) == Array2D(2, 2, 1.0));

    try {
        normalize_mass(Array2D(3, 3), 1.0);
        FAIL("expected ZeroMass");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ZeroMass);
    }
}

TEST_CASE("obstacle mask bookkeeping") {
    ObstacleMask mask(4);
    CHECK(mask.empty());
    mask.set(1, 2, true);
    mask.set(1, 2, true);
    CHECK(mask.count() == 1);
    CHECK(mask(1, 2));
    CHECK(mask.transposed()(2, 1));
    mask.set(1, 2, false);
    CHECK(mask.empty());
}
