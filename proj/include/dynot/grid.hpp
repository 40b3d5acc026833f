#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dynot {

/// Dense row-major 2-D array of doubles.
class Array2D {
public:
    Array2D() = default;
    Array2D(int rows, int cols, double fill = 0.0);
    Array2D(int rows, int cols, std::vector<double> values);

    int rows() const noexcept { return rows_; }
    int cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool is_square() const noexcept { return rows_ == cols_; }

    double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
    double& operator[](std::size_t k) { return data_[k]; }
    double operator[](std::size_t k) const { return data_[k]; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    double sum() const;
    double min() const;
    double max() const;
    Array2D transposed() const;

    friend bool operator==(const Array2D&, const Array2D&) = default;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

/// One image or one time slice: an n x n field of nonnegative mass per cell.
using DensityGrid = Array2D;

/// Ordered slices rho_0 ... rho_T.
using Path = std::vector<DensityGrid>;

enum class BoundaryCondition { Dirichlet, Neumann, Periodic };

/// Momentum on cell faces. m1 is (n+1) x n and carries flux in the row
/// direction across the face between cells (i-1, j) and (i, j); m2 is
/// n x (n+1) and carries flux in the column direction.
///
/// Face index 0 and n are the outer faces. Dirichlet keeps them at zero,
/// Neumann treats them as free unknowns, and Periodic stores the wrap-around
/// face at index 0 and leaves index n unused (always zero).
struct StaggeredField {
    Array2D m1;
    Array2D m2;

    StaggeredField() = default;
    explicit StaggeredField(int n);

    int n() const noexcept { return m1.cols(); }
    double dot(const StaggeredField& other) const;
};

/// Obstacle cells (true = blocked). An empty mask has size() == 0.
class ObstacleMask {
public:
    ObstacleMask() = default;
    explicit ObstacleMask(int n);
    ObstacleMask(int n, std::vector<std::uint8_t> cells);

    int n() const noexcept { return n_; }
    bool empty() const noexcept { return count_ == 0; }
    std::size_t count() const noexcept { return count_; }

    bool operator()(int i, int j) const { return n_ > 0 && cells_[static_cast<std::size_t>(i) * n_ + j] != 0; }
    bool at(std::size_t k) const { return n_ > 0 && cells_[k] != 0; }
    void set(int i, int j, bool blocked);

    ObstacleMask transposed() const;

private:
    int n_ = 0;
    std::size_t count_ = 0;
    std::vector<std::uint8_t> cells_;
};

enum class FaceAxis : std::uint8_t { Row, Col };

/// A momentum unknown: storage slot in m1 (Row) or m2 (Col) plus the flat
/// indices of the cell it leaves (`lower`, divergence +1) and the cell it
/// enters (`upper`, divergence -1). -1 marks the outside of the domain.
struct Face {
    FaceAxis axis;
    int i;
    int j;
    int lower;
    int upper;
};

/// Faces that carry a free momentum unknown under the given boundary condition.
std::vector<Face> active_faces(int n, BoundaryCondition bc);

/// True when either neighbour of the face is an obstacle cell.
bool face_blocked(const Face& face, const ObstacleMask& mask);

inline double& face_value(StaggeredField& m, const Face& f) {
    return f.axis == FaceAxis::Row ? m.m1(f.i, f.j) : m.m2(f.i, f.j);
}
inline double face_value(const StaggeredField& m, const Face& f) {
    return f.axis == FaceAxis::Row ? m.m1(f.i, f.j) : m.m2(f.i, f.j);
}

/// Discrete divergence: out(i,j) = m1(i+1,j) - m1(i,j) + m2(i,j+1) - m2(i,j).
/// Periodic wraps index n back to 0.
Array2D divergence(const StaggeredField& m, BoundaryCondition bc);

/// Adjoint of `divergence` on the admissible fields of `bc`; an interior row
/// face between (i-1,j) and (i,j) carries y(i-1,j) - y(i,j).
StaggeredField face_gradient(const Array2D& y, BoundaryCondition bc);

/// Block-average pooling to target_n x target_n.
DensityGrid downsample(const DensityGrid& x, int target_n);

DensityGrid threshold(const DensityGrid& x, double eps);

DensityGrid normalize_mass(const DensityGrid& x, double target_mass);

/// Mass as sum of absolute values.
double mass(const DensityGrid& x);

}  // namespace dynot
