#pragma once

#include <vector>

#include "dynot/grid.hpp"
#include "dynot/transport_energy.hpp"

namespace dynot {

/// Gaussian-window SSIM constants for images in [0, 1].
struct SsimParams {
    int window = 11;     // side length; shrunk to n for smaller images
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
};

/// Mean SSIM over all fully contained window positions.
double ssim(const DensityGrid& a, const DensityGrid& b, const SsimParams& p = {});

struct SsimSequence {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
    std::vector<double> per_pair;
};

/// SSIM of every adjacent pair (rho_t, rho_{t+1}).
SsimSequence ssim_sequence(const Path& path, const SsimParams& p = {});

/// T * J: squared-W2 estimate for a minimized path with unit steps.
double w2_estimate(const EnergyReport& report, int T);

}  // namespace dynot
