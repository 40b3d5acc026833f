#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "dynot/errors.hpp"
#include "dynot/geodesic.hpp"
#include "dynot/gradcheck.hpp"
#include "dynot/io.hpp"
#include "dynot/metrics.hpp"
#include "dynot/transport_energy.hpp"

namespace dynot::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kDefaultEps = 1e-5;
constexpr double kGradTolerance = 1e-5;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// String-valued options for one subcommand. Values come from the command
// line first and from --config second.
class Options {
public:
    explicit Options(CLI::App* cmd) : cmd_(cmd) {
        cmd_->add_option("--config", config_, "key=value file; explicit flags win");
    }

    void add(const std::string& name, const std::string& help) {
        auto& slot = raw_[name];
        opts_[name] = cmd_->add_option("--" + name, slot, help);
    }

    void add_hidden(const std::string& name) {
        auto& slot = raw_[name];
        opts_[name] = cmd_->add_option("--" + name, slot)->group("");
    }

    void merge_config() {
        if (config_.empty()) return;
        std::set<std::string> allowed;
        for (const auto& [name, opt] : opts_) allowed.insert(name);
        for (const auto& [key, value] : io::read_config(config_, allowed)) config_values_[key] = value;
    }

    std::optional<std::string> get(const std::string& name) const {
        const auto opt = opts_.at(name);
        if (opt->count() > 0) return raw_.at(name);
        if (auto it = config_values_.find(name); it != config_values_.end()) return it->second;
        return std::nullopt;
    }

    std::string require(const std::string& name) const {
        auto v = get(name);
        if (!v) throw UsageError("--" + name + " is required");
        return *v;
    }

    double number(const std::string& name, double fallback) const {
        const auto v = get(name);
        if (!v) return fallback;
        try {
            std::size_t used = 0;
            const double d = std::stod(*v, &used);
            if (used != v->size()) throw std::invalid_argument(*v);
            return d;
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidConfig, "--" + name + " expects a number, got '" + *v + "'");
        }
    }

    long long integer(const std::string& name, long long fallback) const {
        const auto v = get(name);
        if (!v) return fallback;
        try {
            std::size_t used = 0;
            const long long i = std::stoll(*v, &used);
            if (used != v->size()) throw std::invalid_argument(*v);
            return i;
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidConfig, "--" + name + " expects an integer, got '" + *v + "'");
        }
    }

private:
    CLI::App* cmd_;
    std::string config_;
    std::map<std::string, std::string> raw_;
    std::map<std::string, CLI::Option*> opts_;
    std::map<std::string, std::string> config_values_;
};

void add_transport_flags(Options& o) {
    o.add("mode", "balanced|unbalanced");
    o.add("tau", "source-term weight (unbalanced)");
    o.add("bc", "dirichlet|neumann|periodic");
    o.add("obstacle", "obstacle mask PGM (nonzero = wall)");
}

BoundaryCondition parse_bc(const Options& o) {
    const std::string v = o.get("bc").value_or("dirichlet");
    if (v == "dirichlet") return BoundaryCondition::Dirichlet;
    if (v == "neumann") return BoundaryCondition::Neumann;
    if (v == "periodic") return BoundaryCondition::Periodic;
    throw Error(ErrorCode::InvalidConfig, "unknown boundary condition '" + v + "'");
}

EnergyMode parse_mode(const Options& o, ObstacleMask mask) {
    const std::string v = o.get("mode").value_or("balanced");
    const double tau = o.number("tau", 1.0);
    if (v == "balanced") return EnergyMode::balanced(std::move(mask));
    if (v == "unbalanced") {
        if (!(tau > 0.0)) throw Error(ErrorCode::InvalidConfig, "--tau must be positive");
        return EnergyMode::unbalanced(tau, std::move(mask));
    }
    throw Error(ErrorCode::InvalidConfig, "unknown mode '" + v + "'");
}

ObstacleMask pool_mask(const ObstacleMask& mask, int target_n) {
    if (mask.n() == target_n) return mask;
    const int factor = mask.n() / target_n;
    ObstacleMask out(target_n);
    for (int i = 0; i < mask.n(); ++i)
        for (int j = 0; j < mask.n(); ++j)
            if (mask(i, j)) out.set(i / factor, j / factor, true);
    return out;
}

ObstacleMask load_mask(const Options& o, int source_n, int working_n) {
    const auto file = o.get("obstacle");
    if (!file) return {};
    const DensityGrid pixels = io::read_image(*file);
    const int n = pixels.rows();
    if (n != source_n && n != working_n)
        throw Error(ErrorCode::ShapeMismatch,
                    "mask is " + std::to_string(n) + "x" + std::to_string(n) + ", images are " +
                        std::to_string(source_n) + "x" + std::to_string(source_n));
    return pool_mask(io::read_mask(*file, n), working_n);
}

Path threshold_frames(const Path& frames, double eps, const ObstacleMask& mask) {
    Path out;
    for (const auto& f : frames) out.push_back(preprocess(f, eps, mask));
    return out;
}

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_st>(err);
    auto logger = std::make_shared<spdlog::logger>("dynot", sink);
    logger->set_pattern("[%l] %v");
    const char* env = std::getenv("DYNOT_LOG");
    const std::string level = env ? env : "info";
    if (level == "error")
        logger->set_level(spdlog::level::err);
    else if (level == "debug")
        logger->set_level(spdlog::level::debug);
    else
        logger->set_level(spdlog::level::info);
    return logger;
}

int cmd_geodesic(const Options& o, std::ostream& out, spdlog::logger& log) {
    DensityGrid source = io::read_image(o.require("source"));
    DensityGrid target = io::read_image(o.require("target"));
    const fs::path out_dir = o.require("out");
    if (source.rows() != target.rows())
        throw Error(ErrorCode::ShapeMismatch, "source and target differ in size");
    const int source_n = source.rows();

    if (const auto ds = o.integer("downsample", 0); ds > 0) {
        source = downsample(source, static_cast<int>(ds));
        target = downsample(target, static_cast<int>(ds));
    }
    const int n = source.rows();

    SolverConfig cfg;
    cfg.eps = o.number("eps", kDefaultEps);
    if (!(cfg.eps > 0.0)) throw Error(ErrorCode::InvalidConfig, "--eps must be positive");
    cfg.bc = parse_bc(o);
    cfg.mode = parse_mode(o, load_mask(o, source_n, n));
    cfg.beta = o.number("beta", 0.0);
    cfg.max_iters = static_cast<int>(o.integer("max-iters", cfg.max_iters));
    cfg.seed = static_cast<std::uint64_t>(o.integer("seed", 0));
    const long long steps = o.integer("steps", 0);
    if (o.get("steps") && steps < 1) throw Error(ErrorCode::InvalidConfig, "--steps must be at least 1");

    // Balanced transport runs on a standard mass: the target is rescaled to
    // the source's mass after thresholding.
    const auto& mask = cfg.mode.obstacles;
    source = preprocess(source, cfg.eps, mask);
    target = preprocess(target, cfg.eps, mask);
    if (!cfg.mode.is_unbalanced() && mass(target) != mass(source))
        target = preprocess(target, cfg.eps, mask, mass(source));
    cfg.T = steps > 0 ? static_cast<int>(steps) : choose_T(source, target);
    log.info("n={} T={} mode={} bc={}", n, cfg.T, cfg.mode.is_unbalanced() ? "unbalanced" : "balanced",
             o.get("bc").value_or("dirichlet"));

    const GeodesicResult result = optimize_path(source, target, cfg);
    log.info("{} after {} iterations, J={}", result.converged ? "converged" : "stopped", result.iterations,
             io::format_number(result.J_final));

    const auto files = io::write_frames(result.path, out_dir, "frame");
    const EnergyReport energy = path_energy(result.path, cfg.bc, cfg.mode, cfg.solve);
    auto report = io::make_report(result.path, &energy, ssim_sequence(result.path));
    report.extras = {{"iterations", std::to_string(result.iterations)},
                     {"converged", result.converged ? "1" : "0"},
                     {"seed", std::to_string(cfg.seed)}};
    io::write_report(report, out_dir / "report.csv");

    out << "T = " << cfg.T << "\n";
    out << "J = " << io::format_number(energy.J) << "\n";
    out << "w2_estimate = " << io::format_number(report.w2_estimate) << "\n";
    out << "frames = " << files.size() << " in " << out_dir.string() << "\n";
    return result.converged ? 0 : 2;
}

int cmd_energy(const Options& o, std::ostream& out, spdlog::logger& log) {
    const fs::path dir = o.require("frames");
    Path frames = io::read_frames(dir);
    if (frames.size() < 2) throw UsageError("energy needs at least two frames in " + dir.string());
    const int n = frames.front().rows();
    const auto bc = parse_bc(o);
    const auto mode = parse_mode(o, load_mask(o, n, n));
    frames = threshold_frames(frames, kDefaultEps, mode.obstacles);
    log.debug("{} frames of {}x{}", frames.size(), n, n);

    const EnergyReport energy = path_energy(frames, bc, mode);
    const auto report = io::make_report(frames, &energy, ssim_sequence(frames));
    io::write_report(report, dir / "energy_report.csv");
    out << "J = " << io::format_number(energy.J) << "\n";
    return 0;
}

int cmd_gradcheck(const Options& o, std::ostream& out, spdlog::logger& log) {
    const long long n = o.integer("n", 8);
    const long long T = o.integer("steps", 4);
    const auto seed = static_cast<std::uint64_t>(o.integer("seed", 7));
    if (n < 2 || n > 16) throw Error(ErrorCode::InvalidConfig, "--n must lie in [2, 16]");
    if (T < 2 || T > 6) throw Error(ErrorCode::InvalidConfig, "--steps must lie in [2, 6]");
    const auto bc = parse_bc(o);
    const auto mode = parse_mode(o, {});
    const double corruption = o.number("perturb-gradient", 0.0);

    const Path path = random_density_path(static_cast<int>(n), static_cast<int>(T), seed, !mode.is_unbalanced());
    const auto check = check_gradient(path, bc, mode, 1e-5, corruption);
    log.debug("checked {} interior cells", (T - 1) * n * n);
    out << "max relative error = " << io::format_number(check.max_relative_error) << "\n";
    const bool ok = check.max_relative_error <= kGradTolerance;
    out << (ok ? "PASS" : "FAIL") << "\n";
    return ok ? 0 : 1;
}

int cmd_metrics(const Options& o, std::ostream& out, spdlog::logger&) {
    const fs::path dir = o.require("frames");
    const Path frames = io::read_frames(dir);
    if (frames.size() < 2) throw UsageError("metrics needs at least two frames in " + dir.string());
    const auto seq = ssim_sequence(frames);
    for (std::size_t t = 0; t < seq.per_pair.size(); ++t)
        out << "ssim(" << t << "," << t + 1 << ") = " << io::format_number(seq.per_pair[t]) << "\n";
    out << "mean = " << io::format_number(seq.mean) << "\n";
    out << "std = " << io::format_number(seq.std) << "\n";
    io::write_report(io::make_report(frames, nullptr, seq), dir / "metrics_report.csv");
    return 0;
}

void print_error(std::ostream& err, const std::string& code, const std::string& message,
                 std::optional<int> slice = std::nullopt) {
    err << "error code=" << code;
    if (slice) err << " slice=" << *slice;
    err << "\n" << message << "\n";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Dynamic optimal transport: path energies and geodesic image interpolation", "dynot"};
    app.require_subcommand(1);

    auto* geodesic = app.add_subcommand("geodesic", "minimal-energy interpolation between two images");
    Options geo(geodesic);
    geo.add("source", "source image (PGM)");
    geo.add("target", "target image (PGM)");
    geo.add("out", "output directory for frames and report.csv");
    geo.add("steps", "time steps T (default: from centroid distance)");
    add_transport_flags(geo);
    geo.add("beta", "mass-loss weight");
    geo.add("downsample", "working grid size");
    geo.add("eps", "density threshold");
    geo.add("max-iters", "optimizer iteration cap");
    geo.add("seed", "seed echoed in the report");

    auto* energy = app.add_subcommand("energy", "path energy of a frame sequence");
    Options en(energy);
    en.add("frames", "directory of <prefix>_NNNN.pgm frames");
    add_transport_flags(en);

    auto* gradcheck = app.add_subcommand("gradcheck", "analytic vs finite-difference gradient on a random path");
    Options gc(gradcheck);
    gc.add("n", "grid size (<= 16)");
    gc.add("steps", "time steps (<= 6)");
    gc.add("seed", "random seed");
    gc.add("mode", "balanced|unbalanced");
    gc.add("tau", "source-term weight (unbalanced)");
    gc.add("bc", "dirichlet|neumann|periodic");
    gc.add_hidden("perturb-gradient");

    auto* metrics = app.add_subcommand("metrics", "adjacent-frame SSIM of a frame sequence");
    Options me(metrics);
    me.add("frames", "directory of <prefix>_NNNN.pgm frames");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        print_error(err, "Usage", e.what());
        return 1;
    }

    auto log = make_logger(err);
    try {
        if (geodesic->parsed()) {
            geo.merge_config();
            return cmd_geodesic(geo, out, *log);
        }
        if (energy->parsed()) {
            en.merge_config();
            return cmd_energy(en, out, *log);
        }
        if (gradcheck->parsed()) {
            gc.merge_config();
            return cmd_gradcheck(gc, out, *log);
        }
        me.merge_config();
        return cmd_metrics(me, out, *log);
    } catch (const UsageError& e) {
        print_error(err, "Usage", e.what());
    } catch (const Error& e) {
        print_error(err, std::string(to_string(e.code())), e.what(), e.slice());
    } catch (const std::exception& e) {
        print_error(err, "Internal", e.what());
    }
    return 1;
}

}  // namespace dynot::cli
