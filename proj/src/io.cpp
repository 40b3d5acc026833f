#include "dynot/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <regex>
#include <sstream>

#include "dynot/errors.hpp"

namespace dynot::io {

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + file.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class HeaderReader {
public:
    HeaderReader(const std::string& data, const fs::path& file) : data_(data), file_(file) {}

    int next_int() {
        skip_space_and_comments();
        std::size_t start = pos_;
        while (pos_ < data_.size() && std::isdigit(static_cast<unsigned char>(data_[pos_]))) ++pos_;
        if (start == pos_) throw Error(ErrorCode::CorruptHeader, "malformed PGM header in " + file_.string());
        int value = 0;
        auto [ptr, ec] = std::from_chars(data_.data() + start, data_.data() + pos_, value);
        if (ec != std::errc()) throw Error(ErrorCode::CorruptHeader, "PGM header value out of range in " + file_.string());
        (void)ptr;
        return value;
    }

    // Exactly one whitespace byte separates maxval from P5 raster data.
    std::size_t raster_start() {
        if (pos_ >= data_.size() || !std::isspace(static_cast<unsigned char>(data_[pos_])))
            throw Error(ErrorCode::CorruptHeader, "missing separator before PGM raster in " + file_.string());
        return pos_ + 1;
    }

private:
    void skip_space_and_comments() {
        while (pos_ < data_.size()) {
            if (std::isspace(static_cast<unsigned char>(data_[pos_]))) {
                ++pos_;
            } else if (data_[pos_] == '#') {
                while (pos_ < data_.size() && data_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    const std::string& data_;
    const fs::path& file_;
    std::size_t pos_ = 2;
};

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_double(const std::string& s, const fs::path& file) {
    // strtod round-trips the 17-digit output exactly.
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size())
        throw Error(ErrorCode::CorruptHeader, "bad number '" + s + "' in " + file.string());
    return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, sep)) out.push_back(cell);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

}  // namespace

DensityGrid read_image(const fs::path& file) {
    const std::string data = slurp(file);
    if (data.size() < 2 || data[0] != 'P' || (data[1] != '2' && data[1] != '5'))
        throw Error(ErrorCode::UnsupportedFormat, file.string() + " is not a P2/P5 PGM");
    const bool binary = data[1] == '5';

    HeaderReader header(data, file);
    const int width = header.next_int();
    const int height = header.next_int();
    const int maxval = header.next_int();
    if (width <= 0 || height <= 0) throw Error(ErrorCode::CorruptHeader, "empty image in " + file.string());
    if (maxval <= 0 || maxval > 255)
        throw Error(ErrorCode::UnsupportedFormat, "only 8-bit PGM is supported (maxval " + std::to_string(maxval) + ")");
    if (width != height)
        throw Error(ErrorCode::NonSquare,
                    file.string() + " is " + std::to_string(width) + "x" + std::to_string(height) + ", not square");

    const std::size_t count = static_cast<std::size_t>(width) * height;
    std::vector<double> values(count);
    if (binary) {
        const std::size_t start = header.raster_start();
        if (data.size() < start + count) throw Error(ErrorCode::CorruptHeader, "truncated raster in " + file.string());
        for (std::size_t k = 0; k < count; ++k)
            values[k] = static_cast<unsigned char>(data[start + k]) / static_cast<double>(maxval);
    } else {
        for (std::size_t k = 0; k < count; ++k) {
            const int v = header.next_int();
            if (v > maxval) throw Error(ErrorCode::CorruptHeader, "pixel above maxval in " + file.string());
            values[k] = v / static_cast<double>(maxval);
        }
    }
    return DensityGrid(height, width, std::move(values));
}

void write_image(const DensityGrid& grid, const fs::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + file.string());
    out << "P5\n" << grid.cols() << ' ' << grid.rows() << "\n255\n";
    std::string raster(grid.size(), '\0');
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double v = std::clamp(grid[k], 0.0, 1.0);
        raster[k] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
    }
    out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
    if (!out) throw Error(ErrorCode::IoFailure, "short write to " + file.string());
}

std::vector<fs::path> write_frames(const Path& path, const fs::path& dir, const std::string& prefix) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
    std::vector<fs::path> files;
    for (std::size_t t = 0; t < path.size(); ++t) {
        std::ostringstream name;
        name << prefix << '_' << std::setw(4) << std::setfill('0') << t << ".pgm";
        files.push_back(dir / name.str());
        write_image(path[t], files.back());
    }
    return files;
}

Path read_frames(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error(ErrorCode::IoFailure, dir.string() + " is not a directory");
    static const std::regex pattern(R"((.*)_(\d{4})\.pgm)");
    std::map<int, fs::path> frames;
    std::string prefix;
    bool have_prefix = false;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        std::smatch m;
        if (!entry.is_regular_file() || !std::regex_match(name, m, pattern)) continue;
        if (have_prefix && m[1] != prefix)
            throw Error(ErrorCode::IoFailure, "mixed frame prefixes '" + prefix + "' and '" + m[1].str() + "'");
        prefix = m[1];
        have_prefix = true;
        frames[std::stoi(m[2])] = entry.path();
    }
    Path path;
    int expected = 0;
    for (const auto& [index, file] : frames) {
        if (index != expected)
            throw Error(ErrorCode::IoFailure, "frame " + std::to_string(expected) + " missing in " + dir.string());
        path.push_back(read_image(file));
        if (path.back().rows() != path.front().rows())
            throw Error(ErrorCode::ShapeMismatch, file.string() + " differs in size from the first frame");
        ++expected;
    }
    return path;
}

ObstacleMask read_mask(const fs::path& file, int expected_n) {
    const DensityGrid pixels = read_image(file);
    if (pixels.rows() != expected_n)
        throw Error(ErrorCode::ShapeMismatch, "mask is " + std::to_string(pixels.rows()) + "x" +
                                                  std::to_string(pixels.cols()) + ", images are " +
                                                  std::to_string(expected_n) + "x" + std::to_string(expected_n));
    std::vector<std::uint8_t> cells(pixels.size());
    for (std::size_t k = 0; k < pixels.size(); ++k) cells[k] = pixels[k] > 0.0 ? 1 : 0;
    return ObstacleMask(expected_n, std::move(cells));
}

RunReport make_report(const Path& path, const EnergyReport* energy, const SsimSequence& ssim) {
    RunReport r;
    r.T = static_cast<int>(path.size()) - 1;
    for (int t = 0; t <= r.T; ++t) {
        ReportRow row;
        row.t = t;
        row.mass = mass(path[static_cast<std::size_t>(t)]);
        if (t < r.T) {
            if (energy) row.energy = energy->per_slice_energy[static_cast<std::size_t>(t)];
            if (static_cast<std::size_t>(t) < ssim.per_pair.size()) row.ssim_next = ssim.per_pair[static_cast<std::size_t>(t)];
        }
        r.rows.push_back(row);
    }
    r.J = energy ? energy->J : 0.0;
    r.ssim_mean = ssim.mean;
    r.ssim_std = ssim.std;
    r.w2_estimate = energy ? w2_estimate(*energy, r.T) : 0.0;
    return r;
}

std::string format_number(double v) {
    std::ostringstream ss;
    ss << std::setprecision(17) << v;
    return ss.str();
}

void write_report(const RunReport& report, const fs::path& file) {
    std::ofstream out(file);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + file.string());
    out << "t,energy,mass,ssim_next\n";
    for (const auto& row : report.rows) {
        out << row.t << ',' << (row.energy ? format_number(*row.energy) : "") << ',' << format_number(row.mass) << ','
            << (row.ssim_next ? format_number(*row.ssim_next) : "") << '\n';
    }
    out << "summary,J=" << format_number(report.J) << ",ssim_mean=" << format_number(report.ssim_mean)
        << ",ssim_std=" << format_number(report.ssim_std) << ",w2_estimate=" << format_number(report.w2_estimate)
        << ",T=" << report.T;
    for (const auto& [key, value] : report.extras) out << ',' << key << '=' << value;
    out << '\n';
    if (!out) throw Error(ErrorCode::IoFailure, "short write to " + file.string());
}

RunReport read_report(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + file.string());
    std::string line;
    if (!std::getline(in, line) || line != "t,energy,mass,ssim_next")
        throw Error(ErrorCode::CorruptHeader, "unexpected report header in " + file.string());
    RunReport r;
    while (std::getline(in, line)) {
        const auto cells = split(line, ',');
        if (cells.empty()) continue;
        if (cells[0] == "summary") {
            for (std::size_t k = 1; k < cells.size(); ++k) {
                const auto eq = cells[k].find('=');
                if (eq == std::string::npos) throw Error(ErrorCode::CorruptHeader, "bad summary field " + cells[k]);
                const std::string key = cells[k].substr(0, eq);
                const std::string value = cells[k].substr(eq + 1);
                if (key == "J") r.J = parse_double(value, file);
                else if (key == "ssim_mean") r.ssim_mean = parse_double(value, file);
                else if (key == "ssim_std") r.ssim_std = parse_double(value, file);
                else if (key == "w2_estimate") r.w2_estimate = parse_double(value, file);
                else if (key == "T") r.T = std::stoi(value);
                else r.extras.emplace_back(key, value);
            }
            continue;
        }
        if (cells.size() != 4) throw Error(ErrorCode::CorruptHeader, "bad report row: " + line);
        ReportRow row;
        row.t = std::stoi(cells[0]);
        if (!cells[1].empty()) row.energy = parse_double(cells[1], file);
        row.mass = parse_double(cells[2], file);
        if (!cells[3].empty()) row.ssim_next = parse_double(cells[3], file);
        r.rows.push_back(row);
    }
    return r;
}

std::map<std::string, std::string> read_config(const fs::path& file, const std::set<std::string>& allowed) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open config " + file.string());
    std::map<std::string, std::string> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string text = trim(line);
        if (text.empty() || text.front() == '#') continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::InvalidConfig, file.string() + ":" + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(text.substr(0, eq));
        if (!allowed.contains(key))
            throw Error(ErrorCode::InvalidConfig, file.string() + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
        out[key] = trim(text.substr(eq + 1));
    }
    return out;
}

}  // namespace dynot::io
