#include "dynot/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "dynot/errors.hpp"

namespace dynot {

namespace {

std::vector<double> gaussian_window(int side, double sigma) {
    std::vector<double> w(static_cast<std::size_t>(side) * side);
    const double center = (side - 1) / 2.0;
    double total = 0.0;
    for (int i = 0; i < side; ++i) {
        for (int j = 0; j < side; ++j) {
            const double di = i - center;
            const double dj = j - center;
            const double v = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
            w[static_cast<std::size_t>(i) * side + j] = v;
            total += v;
        }
    }
    for (double& v : w) v /= total;
    return w;
}

}  // namespace

double ssim(const DensityGrid& a, const DensityGrid& b, const SsimParams& p) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw Error(ErrorCode::ShapeMismatch, "ssim inputs differ in shape");
    if (a.rows() == 0 || a.cols() == 0) throw Error(ErrorCode::ShapeMismatch, "ssim of an empty image");

    const int side = std::min({p.window, a.rows(), a.cols()});
    const auto w = gaussian_window(side, p.sigma);
    const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
    const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);

    double acc = 0.0;
    int count = 0;
    for (int r0 = 0; r0 + side <= a.rows(); ++r0) {
        for (int c0 = 0; c0 + side <= a.cols(); ++c0) {
            // Two passes: moments about the window means stay accurate on flat patches.
            double mu_a = 0.0, mu_b = 0.0;
            for (int i = 0; i < side; ++i) {
                for (int j = 0; j < side; ++j) {
                    const double wk = w[static_cast<std::size_t>(i) * side + j];
                    mu_a += wk * a(r0 + i, c0 + j);
                    mu_b += wk * b(r0 + i, c0 + j);
                }
            }
            double var_a = 0.0, var_b = 0.0, cov = 0.0;
            for (int i = 0; i < side; ++i) {
                for (int j = 0; j < side; ++j) {
                    const double wk = w[static_cast<std::size_t>(i) * side + j];
                    const double da = a(r0 + i, c0 + j) - mu_a;
                    const double db = b(r0 + i, c0 + j) - mu_b;
                    var_a += wk * da * da;
                    var_b += wk * db * db;
                    cov += wk * da * db;
                }
            }
            acc += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
                   ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
            ++count;
        }
    }
    return acc / count;
}

SsimSequence ssim_sequence(const Path& path, const SsimParams& p) {
    if (path.size() < 2) throw Error(ErrorCode::ShapeMismatch, "ssim_sequence needs at least two frames");
    SsimSequence out;
    for (std::size_t t = 0; t + 1 < path.size(); ++t) out.per_pair.push_back(ssim(path[t], path[t + 1], p));
    for (double v : out.per_pair) out.mean += v;
    out.mean /= static_cast<double>(out.per_pair.size());
    for (double v : out.per_pair) out.std += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(out.std / static_cast<double>(out.per_pair.size()));
    return out;
}

double w2_estimate(const EnergyReport& report, int T) { return T * report.J; }

}  // namespace dynot
