#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "subthz/link.hpp"
#include "subthz/planner.hpp"
#include "subthz/zxm.hpp"

namespace subthz::harness {

inline constexpr const char* kToolVersion = "0.1.0";

enum class ExperimentKind {
    PaprCcdf,
    BlerSweep,
    OpboTable,
    PnComparison,
    ZxmRate,
    ZxmBer,
    LatencySweep,
    Numerology,
    MulticarrierPsd,
};

std::string to_string(ExperimentKind k);
ExperimentKind parse_kind(const std::string& name);

struct PaprSettings {
    std::size_t blocks = 100000;
    std::vector<std::string> series{"ofdm:qpsk", "dfts_ofdm:qpsk", "scfde:qpsk", "scfde:16qam", "scfde:16apsk",
                                    "scfde:64qam", "scfde:64apsk", "scfde_opt:64apsk"};
    int oversampling = 4;        // transform oversampling of the block format
    int scfde_oversampling = 8;  // SC-FDE samples per symbol at that rate
    double roll_off = 0.22;
    int span_symbols = 16;
    double threshold_step_db = 0.05;
    double threshold_max_db = 14.0;
    int optimizer_iterations = 200;
    int optimizer_train_blocks = 1000;
};

struct OpboSettings {
    std::vector<double> opbo_db{3.0, 4.0, 5.0, 6.0};
    std::vector<std::string> constellations{"qpsk", "16qam", "64qam"};
    double target_bler = 0.1;
};

struct PnSettings {
    std::vector<std::string> waveforms{"scfde", "dfts_ofdm"};
    double target_bler = 0.1;
};

struct ZxmSettings {
    zxm::RunlengthSpec spec{};
    double roll_off = 0.3;
    int span_symbols = 8;
    int oversampling = 8;  // pulse samples per Nyquist interval
    int rx_oversample = 2;
    int memory_symbols = 8;
    std::vector<double> snr_db{0.0, 5.0, 10.0, 15.0, 20.0};
    std::size_t blocks = 200;
    std::vector<int> rate_ftn{1, 2, 3, 4};
    std::vector<int> rate_min_run{1, 2, 3, 4, 5};
};

/// 0, 0.05, ..., 1.
std::vector<double> default_alpha_grid();

struct LatencySettings {
    planner::LatencyScenario scenario{};
    std::vector<double> alphas = default_alpha_grid();
    std::vector<int> retx{0, 1, 2};
    double budget_us = 100.0;
};

struct NumerologySettings {
    std::vector<double> scs_khz{480.0, 960.0, 1920.0, 3840.0};
};

struct PsdSettings {
    int channels = 4;
    std::string waveform = "scfde";  // per-channel waveform: scfde or dfts_ofdm
    double spacing = 1.25;           // channel spacing in units of the channel sample rate
    int composite_factor = 8;        // composite rate / channel sample rate
    std::size_t blocks = 8;
    std::size_t segment = 4096;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::Numerology;
    std::string output = "out";
    std::uint64_t seed = 1;
    int workers = 1;

    link::LinkConfig link{};
    PaprSettings papr{};
    OpboSettings opbo{};
    PnSettings pn{};
    ZxmSettings zxm{};
    LatencySettings latency{};
    NumerologySettings numerology{};
    PsdSettings psd{};
};

struct Diagnostic {
    int line;  // 0 when the problem is not tied to one line
    std::string message;
};

/// All problems found in one parse.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<Diagnostic> diags);
    const std::vector<Diagnostic>& diagnostics() const noexcept { return diags_; }

private:
    std::vector<Diagnostic> diags_;
};

/// Line-oriented `key = value` text; `#` starts a comment; dotted keys name
/// sections (`link.code.rate = 3/4`). Unknown keys, malformed values and
/// constraint violations are all collected before ConfigError is thrown.
ExperimentConfig parse_config(const std::string& text);

/// Canonical text listing every key; parse_config(serialize(c)) equals c.
std::string serialize(const ExperimentConfig& cfg);

/// Every key understood by the parser, in canonical order.
std::vector<std::string> config_keys();

/// Hex SHA-256 of the canonical serialization, taken with `workers` and
/// `output` reset to their defaults since neither affects the results.
std::string config_digest(const ExperimentConfig& cfg);
std::string sha256_hex(const std::string& bytes);

struct OutputFile {
    std::string name;
    std::string sha256;
    std::size_t bytes;
};

struct ResultManifest {
    std::string experiment;
    std::string config_digest;
    std::string tool_version = kToolVersion;
    std::uint64_t seed = 0;
    int workers = 1;
    double wall_clock_s = 0.0;
    std::vector<OutputFile> files;

    std::string to_json() const;
};

/// Error from a failed run, naming the failing stage.
class RunError : public RuntimeFailure {
public:
    RunError(std::string stage, const std::string& what)
        : RuntimeFailure("experiment stage '" + stage + "': " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

/// Runs the experiment, writes its CSVs and manifest.json into cfg.output and
/// returns the manifest. CSVs are a pure function of (config, seed). On
/// failure every file written so far is removed and RunError is thrown.
ResultManifest run_experiment(const ExperimentConfig& cfg);

/// Builds the CSV text for the Table 1 rows and a latency sweep (shared with the CLI).
std::string numerology_csv(const std::vector<double>& scs_khz, const std::string& trailer);
std::string latency_csv(const LatencySettings& s, const std::string& trailer);

/// Parses "a:b:step" (inclusive of b within rounding) or "a,b,c" into values.
std::vector<double> parse_range(const std::string& text);

}  // namespace subthz::harness
