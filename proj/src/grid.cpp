#include "dynot/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dynot/errors.hpp"

namespace dynot {

Array2D::Array2D(int rows, int cols, double fill)
    : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
    if (rows < 0 || cols < 0) throw Error(ErrorCode::ShapeMismatch, "negative array dimension");
}

Array2D::Array2D(int rows, int cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (rows < 0 || cols < 0 || data_.size() != static_cast<std::size_t>(rows) * cols)
        throw Error(ErrorCode::ShapeMismatch, "value count does not match " + std::to_string(rows) + "x" +
                                                  std::to_string(cols));
}

double Array2D::sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

double Array2D::min() const { return data_.empty() ? 0.0 : *std::min_element(data_.begin(), data_.end()); }

double Array2D::max() const { return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end()); }

Array2D Array2D::transposed() const {
    Array2D out(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
        for (int j = 0; j < cols_; ++j) out(j, i) = (*this)(i, j);
    return out;
}

StaggeredField::StaggeredField(int n) : m1(n + 1, n), m2(n, n + 1) {}

double StaggeredField::dot(const StaggeredField& other) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < m1.size(); ++k) acc += m1[k] * other.m1[k];
    for (std::size_t k = 0; k < m2.size(); ++k) acc += m2[k] * other.m2[k];
    return acc;
}

ObstacleMask::ObstacleMask(int n) : n_(n), cells_(static_cast<std::size_t>(n) * n, 0) {}

ObstacleMask::ObstacleMask(int n, std::vector<std::uint8_t> cells) : n_(n), cells_(std::move(cells)) {
    if (cells_.size() != static_cast<std::size_t>(n) * n)
        throw Error(ErrorCode::ShapeMismatch, "obstacle mask must hold n*n cells");
    count_ = static_cast<std::size_t>(std::count_if(cells_.begin(), cells_.end(), [](auto c) { return c != 0; }));
}

void ObstacleMask::set(int i, int j, bool blocked) {
    auto& c = cells_[static_cast<std::size_t>(i) * n_ + j];
    if ((c != 0) == blocked) return;
    if (blocked)
        ++count_;
    else
        --count_;
    c = blocked ? 1 : 0;
}

ObstacleMask ObstacleMask::transposed() const {
    ObstacleMask out(n_);
    for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) out.set(j, i, (*this)(i, j));
    return out;
}

std::vector<Face> active_faces(int n, BoundaryCondition bc) {
    std::vector<Face> faces;
    faces.reserve(static_cast<std::size_t>(2) * (n + 1) * n);
    const auto cell = [n](int i, int j) { return i * n + j; };

    int first = 1;
    int last = n - 1;
    if (bc == BoundaryCondition::Neumann) {
        first = 0;
        last = n;
    } else if (bc == BoundaryCondition::Periodic) {
        first = 0;
    }

    for (int i = first; i <= last; ++i) {
        for (int j = 0; j < n; ++j) {
            int lower = i - 1;
            int upper = i;
            if (bc == BoundaryCondition::Periodic && i == 0) lower = n - 1;
            faces.push_back({FaceAxis::Row, i, j, lower >= 0 ? cell(lower, j) : -1, upper < n ? cell(upper, j) : -1});
        }
    }
    for (int i = 0; i < n; ++i) {
        for (int j = first; j <= last; ++j) {
            int lower = j - 1;
            int upper = j;
            if (bc == BoundaryCondition::Periodic && j == 0) lower = n - 1;
            faces.push_back({FaceAxis::Col, i, j, lower >= 0 ? cell(i, lower) : -1, upper < n ? cell(i, upper) : -1});
        }
    }
    return faces;
}

bool face_blocked(const Face& face, const ObstacleMask& mask) {
    if (mask.empty()) return false;
    return (face.lower >= 0 && mask.at(static_cast<std::size_t>(face.lower))) ||
           (face.upper >= 0 && mask.at(static_cast<std::size_t>(face.upper)));
}

namespace {

void check_field(const StaggeredField& m) {
    const int n = m.m1.cols();
    if (n < 1 || m.m1.rows() != n + 1 || m.m2.rows() != n || m.m2.cols() != n + 1)
        throw Error(ErrorCode::ShapeMismatch, "staggered field components disagree on n");
}

}  // namespace

Array2D divergence(const StaggeredField& m, BoundaryCondition bc) {
    check_field(m);
    const int n = m.n();
    const bool wrap = bc == BoundaryCondition::Periodic;
    Array2D out(n, n);
    for (int i = 0; i < n; ++i) {
        const int ip = (wrap && i + 1 == n) ? 0 : i + 1;
        for (int j = 0; j < n; ++j) {
            const int jp = (wrap && j + 1 == n) ? 0 : j + 1;
            out(i, j) = m.m1(ip, j) - m.m1(i, j) + m.m2(i, jp) - m.m2(i, j);
        }
    }
    return out;
}

StaggeredField face_gradient(const Array2D& y, BoundaryCondition bc) {
    if (!y.is_square() || y.rows() < 1) throw Error(ErrorCode::ShapeMismatch, "face_gradient expects a square field");
    const int n = y.rows();
    StaggeredField g(n);
    for (const Face& f : active_faces(n, bc)) {
        const double lo = f.lower >= 0 ? y[static_cast<std::size_t>(f.lower)] : 0.0;
        const double up = f.upper >= 0 ? y[static_cast<std::size_t>(f.upper)] : 0.0;
        face_value(g, f) = lo - up;
    }
    return g;
}

DensityGrid downsample(const DensityGrid& x, int target_n) {
    if (!x.is_square()) throw Error(ErrorCode::ShapeMismatch, "downsample expects a square grid");
    const int n = x.rows();
    if (target_n <= 0 || n % target_n != 0)
        throw Error(ErrorCode::IncompatibleSize,
                    "target size " + std::to_string(target_n) + " does not divide " + std::to_string(n));
    const int factor = n / target_n;
    const double inv_area = 1.0 / (static_cast<double>(factor) * factor);
    DensityGrid out(target_n, target_n);
    for (int bi = 0; bi < target_n; ++bi) {
        for (int bj = 0; bj < target_n; ++bj) {
            double acc = 0.0;
            for (int i = bi * factor; i < (bi + 1) * factor; ++i)
                for (int j = bj * factor; j < (bj + 1) * factor; ++j) acc += x(i, j);
            out(bi, bj) = acc * inv_area;
        }
    }
    return out;
}

DensityGrid threshold(const DensityGrid& x, double eps) {
    DensityGrid out = x;
    for (double& v : out.values()) v = std::max(v, eps);
    return out;
}

DensityGrid normalize_mass(const DensityGrid& x, double target_mass) {
    const double total = x.sum();
    if (!(total > 0.0)) throw Error(ErrorCode::ZeroMass, "cannot normalize a grid with zero mass");
    DensityGrid out = x;
    const double scale = target_mass / total;
    for (double& v : out.values()) v *= scale;
    return out;
}

double mass(const DensityGrid& x) {
    double acc = 0.0;
    for (double v : x.values()) acc += std::abs(v);
    return acc;
}

}  // namespace dynot
