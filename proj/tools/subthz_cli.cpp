#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "subthz/harness.hpp"

using namespace subthz;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

std::vector<int> to_ints(const std::vector<double>& v) {
    std::vector<int> out;
    for (double x : v) {
        if (x != std::floor(x) || x < 0) throw InvalidArgument("expected non-negative integers, got " + format_double(x));
        out.push_back(static_cast<int>(x));
    }
    return out;
}

int emit(const std::string& text, const std::string& path) {
    if (path.empty()) {
        std::cout << text;
        return kOk;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        std::cerr << "error: cannot write '" << path << "'\n";
        return kRuntimeError;
    }
    f << text;
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sub-THz waveform link-level toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", harness::kToolVersion);

    auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
    std::string config_path, out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    run->add_option("config", config_path, "Experiment config (key = value lines)")->required();
    run->add_option("--seed", seed, "Override the master seed");
    run->add_option("--out", out_dir, "Override the output directory");
    run->add_option("--workers", workers, "Worker threads (results do not depend on this)")->check(CLI::PositiveNumber);

    auto* num = app.add_subcommand("numerology", "Print the slot numerology table as CSV");
    std::string scs_list = "480,960,1920,3840", num_out;
    num->add_option("--scs-khz", scs_list, "Subcarrier spacings in kHz")->capture_default_str();
    num->add_option("-o,--output", num_out, "Write to a file instead of stdout");

    auto* lat = app.add_subcommand("latency", "Print a user-plane latency sweep over alpha as CSV");
    std::string alpha_sweep = "0:1:0.05", retx_list = "0,1,2", lat_out;
    double lat_scs = 480.0;
    int lat_blocks = 14;
    lat->add_option("--alpha-sweep", alpha_sweep, "start:stop:step or a list")->capture_default_str();
    lat->add_option("--retx", retx_list, "Retransmission counts")->capture_default_str();
    lat->add_option("--scs-khz", lat_scs, "Subcarrier spacing in kHz")->capture_default_str();
    lat->add_option("--blocks", lat_blocks, "Blocks per slot")->capture_default_str()->check(CLI::PositiveNumber);
    lat->add_option("-o,--output", lat_out, "Write to a file instead of stdout");

    auto* zr = app.add_subcommand("zxm-rate", "Print ZXM rate against FTN factor and minimum run length as CSV");
    std::string ftn_list = "1,2,3,4", run_list = "1,2,3,4,5", zr_out;
    zr->add_option("--ftn", ftn_list, "FTN factors")->capture_default_str();
    zr->add_option("--min-run", run_list, "Minimum run lengths")->capture_default_str();
    zr->add_option("-o,--output", zr_out, "Write to a file instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }

    const std::string trailer = std::string("# subthz ") + harness::kToolVersion;
    if (*num) {
        try {
            return emit(harness::numerology_csv(harness::parse_range(scs_list), trailer), num_out);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return kConfigError;
        }
    }
    if (*lat) {
        harness::LatencySettings s;
        try {
            s.alphas = harness::parse_range(alpha_sweep);
            s.retx = to_ints(harness::parse_range(retx_list));
            s.scenario.numerology.scs_hz = lat_scs * 1e3;
            s.scenario.n_blocks = lat_blocks;
            for (double a : s.alphas) require(a >= 0.0 && a <= 1.0, "alpha values must lie in [0, 1]");
            s.scenario.validate();
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return kConfigError;
        }
        return emit(harness::latency_csv(s, trailer), lat_out);
    }
    if (*zr) {
        harness::ExperimentConfig cfg;
        try {
            cfg.zxm.rate_ftn = to_ints(harness::parse_range(ftn_list));
            cfg.zxm.rate_min_run = to_ints(harness::parse_range(run_list));
            for (int v : cfg.zxm.rate_ftn) require(v >= 1, "FTN factors must be >= 1");
            for (int v : cfg.zxm.rate_min_run) require(v >= 1, "minimum runs must be >= 1");
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return kConfigError;
        }
        std::ostringstream os;
        os << "ftn_factor,min_run,rate,capacity\n";
        for (int m : cfg.zxm.rate_ftn)
            for (int r : cfg.zxm.rate_min_run)
                os << m << ',' << r << ',' << format_double(zxm::zxm_rate({r, 128, m})) << ','
                   << format_double(zxm::rl_capacity(r)) << '\n';
        os << trailer << '\n';
        return emit(os.str(), zr_out);
    }

    harness::ExperimentConfig cfg;
    try {
        std::ifstream f(config_path, std::ios::binary);
        if (!f) {
            std::cerr << "error: cannot read config '" << config_path << "'\n";
            return kConfigError;
        }
        std::stringstream ss;
        ss << f.rdbuf();
        cfg = harness::parse_config(ss.str());
    } catch (const harness::ConfigError& e) {
        for (const auto& d : e.diagnostics())
            std::cerr << config_path << ":" << (d.line > 0 ? std::to_string(d.line) + ":" : std::string()) << " error: "
                      << d.message << "\n";
        return kConfigError;
    }
    if (seed) {
        cfg.seed = *seed;
        cfg.link.seed = *seed;
    }
    if (workers) {
        cfg.workers = *workers;
        cfg.link.workers = *workers;
    }
    if (!out_dir.empty()) cfg.output = out_dir;

    try {
        const auto m = harness::run_experiment(cfg);
        std::cerr << m.experiment << ": wrote " << m.files.size() + 1 << " files to " << cfg.output << " in "
                  << format_fixed(m.wall_clock_s, 2) << " s\n";
        return kOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
}
