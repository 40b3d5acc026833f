#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dynot/grid.hpp"
#include "dynot/metrics.hpp"
#include "dynot/transport_energy.hpp"

namespace dynot::io {

/// Reads an 8-bit binary (P5) or ASCII (P2) PGM, mapping pixel v to v / maxval.
DensityGrid read_image(const std::filesystem::path& file);

/// Writes an 8-bit P5 PGM; values are clamped to [0, 1] and rounded to v * 255.
void write_image(const DensityGrid& grid, const std::filesystem::path& file);

/// One P5 file per slice, named <prefix>_%04d.pgm. Creates dir if needed.
std::vector<std::filesystem::path> write_frames(const Path& path, const std::filesystem::path& dir,
                                                const std::string& prefix);

/// Frames named <prefix>_NNNN.pgm numbered consecutively from 0000.
Path read_frames(const std::filesystem::path& dir);

/// Nonzero pixels are obstacle cells.
ObstacleMask read_mask(const std::filesystem::path& file, int expected_n);

struct ReportRow {
    int t = 0;
    std::optional<double> energy;  // absent for the last slice
    double mass = 0.0;
    std::optional<double> ssim_next;
};

struct RunReport {
    std::vector<ReportRow> rows;
    double J = 0.0;
    double ssim_mean = 0.0;
    double ssim_std = 0.0;
    double w2_estimate = 0.0;
    int T = 0;
    std::vector<std::pair<std::string, std::string>> extras;  // appended to the summary row
};

/// Per-slice rows plus the summary; energy may be null when only metrics exist.
RunReport make_report(const Path& path, const EnergyReport* energy, const SsimSequence& ssim);

/// CSV with header `t,energy,mass,ssim_next`, one row per slice and a final
/// `summary,key=value,...` row. Numbers carry 17 significant digits.
void write_report(const RunReport& report, const std::filesystem::path& file);
RunReport read_report(const std::filesystem::path& file);

std::string format_number(double v);

/// Flat `key=value` lines with `#` comments. Keys outside `allowed` are rejected.
std::map<std::string, std::string> read_config(const std::filesystem::path& file, const std::set<std::string>& allowed);

}  // namespace dynot::io
