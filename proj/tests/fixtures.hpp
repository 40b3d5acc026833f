#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "dynot/grid.hpp"

namespace dynot::fixtures {

// Isotropic Gaussian centred at (ci, cj), scaled to the given total mass.
inline DensityGrid gaussian_bump(int n, double ci, double cj, double sigma, double total = 1.0) {
    DensityGrid g(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            g(i, j) = std::exp(-((i - ci) * (i - ci) + (j - cj) * (j - cj)) / (2.0 * sigma * sigma));
    return normalize_mass(g, total);
}

struct Point {
    double row = 0.0;
    double col = 0.0;
};

inline Point centroid(const DensityGrid& x) {
    Point p;
    const double m = x.sum();
    for (int i = 0; i < x.rows(); ++i)
        for (int j = 0; j < x.cols(); ++j) {
            p.row += i * x(i, j);
            p.col += j * x(i, j);
        }
    p.row /= m;
    p.col /= m;
    return p;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("dynot_test_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary);
    out << text;
}

}  // namespace dynot::fixtures
