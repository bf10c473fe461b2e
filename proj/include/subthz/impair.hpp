#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "subthz/common.hpp"

namespace subthz::impair {

// ---------------------------------------------------------------------------
// Power amplifier
// ---------------------------------------------------------------------------

/// AM/PM term phi(A) = alpha * A^q / (1 + (A / beta)^q), in radians, with A the input amplitude.
struct AmPm {
    double alpha = -345.0;
    double beta = 0.17;
    double q = 4.0;
};

/// Memoryless modified-Rapp amplifier.
struct PaModel {
    double gain = 6.309573444801933;  // 16 dB small-signal voltage gain
    double a_sat = 1.9;
    double smoothness = 2.0;
    std::optional<AmPm> am_pm = AmPm{};

    void validate() const;
    /// Output amplitude for input amplitude a.
    double am_am(double a) const noexcept;
    double am_pm_rad(double a) const noexcept;
    double saturated_power() const noexcept { return a_sat * a_sat; }
};

CVec pa_apply(std::span<const cplx> x, const PaModel& model);
ComplexSignal pa_apply(const ComplexSignal& x, const PaModel& model);

/// 10 log10(a_sat^2 / mean output power) of the amplified signal.
double opbo_db(std::span<const cplx> x, const PaModel& model);

struct OpboResult {
    ComplexSignal input;  // scaled copy of the input
    double scale;
    double achieved_opbo_db;
};

/// Raised when the requested backoff lies below what the signal can reach.
class UnreachableOpbo : public RuntimeFailure {
public:
    UnreachableOpbo(const std::string& what, double bound_db) : RuntimeFailure(what), bound_db_(bound_db) {}
    double achievable_bound_db() const noexcept { return bound_db_; }

private:
    double bound_db_;
};

/// Bisection on the input scale until the amplified signal sits at the
/// target backoff (within 1e-3 dB).
OpboResult set_opbo(const ComplexSignal& x, const PaModel& model, double target_opbo_db);

/// Same search, returning only the scale factor.
double opbo_scale(std::span<const cplx> x, const PaModel& model, double target_opbo_db);

// ---------------------------------------------------------------------------
// Phase noise
// ---------------------------------------------------------------------------

struct PnPsdSpec {
    std::vector<std::pair<double, double>> breakpoints;  // (offset Hz, dBc/Hz), increasing offsets
    double floor_dbc_hz = -300.0;
    double carrier_hz = 140e9;

    void validate() const;
};

/// Single-sideband level L(f) in dBc/Hz: flat below the first breakpoint,
/// linear in (log10 f, dB) between and beyond the breakpoints, never below the floor.
double pn_level_dbc_hz(const PnPsdSpec& spec, double offset_hz);

/// The 140 GHz default: a -30 dB/decade segment through -80 dBc/Hz at 100 kHz
/// and a -145 dBc/Hz (10 GHz) floor scaled to the carrier.
PnPsdSpec default_pn_spec(double carrier_hz = 140e9);

/// Frequency-domain synthesis of a real phase trajectory (radians) whose
/// one-sided PSD is 2 * 10^(L(f)/10).
RVec pn_generate(const PnPsdSpec& spec, double fs_hz, std::size_t n_samples, std::uint64_t seed);

/// Non-empty when the PSD extends beyond fs/2 and is therefore truncated.
std::optional<std::string> pn_truncation_warning(const PnPsdSpec& spec, double fs_hz);

ComplexSignal pn_apply(const ComplexSignal& x, std::span<const double> phase);
void pn_apply_inplace(std::span<cplx> x, std::span<const double> phase);

// ---------------------------------------------------------------------------
// Noise and channel
// ---------------------------------------------------------------------------

/// Complex Gaussian noise at the given SNR relative to the mean signal power.
ComplexSignal awgn(const ComplexSignal& x, double snr_db, std::uint64_t seed);

/// Adds complex Gaussian noise of the given per-sample variance.
void add_noise(std::span<cplx> x, double noise_var, Rng& rng);

/// Full linear convolution with fixed complex taps.
ComplexSignal tdl_channel(const ComplexSignal& x, std::span<const cplx> taps);

struct TdlProfile {
    std::vector<double> tap_powers;  // linear, one per sample delay
};

/// Rayleigh realization of a tapped-delay-line profile (one draw per call).
CVec tdl_realize(const TdlProfile& profile, std::uint64_t seed);
ComplexSignal tdl_channel(const ComplexSignal& x, const TdlProfile& profile, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Quantization
// ---------------------------------------------------------------------------

struct QuantizerSpec {
    int bits = 8;
    /// Fixed per-rail full scale; when empty it is chosen so that a fraction
    /// `clip_probability` of rail samples exceeds it.
    std::optional<double> full_scale;
    double clip_probability = 1e-4;
    int oversample_factor = 1;

    void validate() const;
};

/// Per-rail full scale resolved for a given input.
double resolve_full_scale(std::span<const cplx> x, const QuantizerSpec& spec);

/// Uniform mid-rise quantizer per I/Q rail with saturation, preceded by
/// band-limited upsampling when oversample_factor > 1.
ComplexSignal quantize(const ComplexSignal& x, const QuantizerSpec& spec);

}  // namespace subthz::impair
