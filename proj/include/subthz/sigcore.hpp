#pragma once

#include <optional>
#include <string>
#include <vector>

#include "subthz/common.hpp"
#include "subthz/mapping.hpp"

namespace subthz::sigcore {

// ---------------------------------------------------------------------------
// Transforms. Unitary convention: both directions scale by 1/sqrt(N).
// ---------------------------------------------------------------------------

CVec dft(std::span<const cplx> x);
CVec idft(std::span<const cplx> x);
ComplexSignal dft(const ComplexSignal& x);
ComplexSignal idft(const ComplexSignal& x);

// ---------------------------------------------------------------------------
// Pulse shaping
// ---------------------------------------------------------------------------

enum class FilterKind { RootRaisedCosine, CustomTaps };

struct FilterSpec {
    FilterKind kind = FilterKind::RootRaisedCosine;
    double roll_off = 0.22;
    int span_symbols = 16;
    int oversampling = 4;
    RVec taps;  // used when kind == CustomTaps

    static FilterSpec rrc(double roll_off, int span_symbols, int oversampling) {
        return {FilterKind::RootRaisedCosine, roll_off, span_symbols, oversampling, {}};
    }
    static FilterSpec custom(RVec taps, int oversampling) {
        return {FilterKind::CustomTaps, 0.0, 0, oversampling, std::move(taps)};
    }

    void validate() const;
};

/// Root-raised-cosine impulse response at t/T, unnormalized (h(0) = 1 - beta + 4 beta / pi).
double rrc_impulse(double t_over_T, double roll_off);

/// Unit-energy symmetric taps of length span_symbols * oversampling + 1.
RVec rrc_taps(const FilterSpec& spec);

/// Taps of any valid spec (RRC synthesized, custom returned as is).
RVec filter_taps(const FilterSpec& spec);

/// Zero-stuffs `symbols` by `factor` and convolves with `taps` (full linear
/// convolution, length (n-1)*factor + taps.size()).
CVec upsample_filter(std::span<const cplx> symbols, std::span<const double> taps, int factor);

/// Full linear convolution with real taps.
CVec convolve(std::span<const cplx> x, std::span<const double> taps);

/// Band-limited interpolation by an integer factor (spectrum zero padding),
/// amplitude preserving.
CVec upsample_bandlimited(std::span<const cplx> x, int factor);

/// Width (in multiples of the symbol rate) of the centred band holding
/// `fraction` of the filter's power.
double occupied_bandwidth(std::span<const double> taps, int oversampling, double fraction = 0.99);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

double papr_db(std::span<const cplx> x);
double papr_db(const ComplexSignal& x);

struct CcdfPoint {
    double threshold_db;
    double probability;
};

/// Fraction of samples strictly above each threshold.
std::vector<CcdfPoint> ccdf(std::span<const double> papr_samples, std::span<const double> thresholds);

/// Smallest threshold t with P(PAPR > t) <= probability (empirical quantile).
double papr_at_ccdf(std::vector<double> papr_samples, double probability);

struct PsdBin {
    double freq_hz;
    double density;  // power per Hz
};

/// Averaged periodogram (Hann window, 50 % overlap), frequencies from -fs/2 upwards.
std::vector<PsdBin> psd_estimate(const ComplexSignal& x, std::size_t segment_len);

// ---------------------------------------------------------------------------
// PAPR-aware transmit filter
// ---------------------------------------------------------------------------

struct FilterDesignOptions {
    int iterations = 200;
    int block_symbols = 256;
    double start_clip_db = 6.0;
    double bandwidth_fraction = 0.99;
    double bandwidth_tolerance = 0.02;
    double ccdf_level = 1e-2;
};

struct FilterDesignReport {
    double base_papr_db = 0.0;       // held-out PAPR of the base filter at ccdf_level
    double optimized_papr_db = 0.0;  // held-out PAPR of the returned taps at ccdf_level
    double base_bandwidth = 0.0;
    double optimized_bandwidth = 0.0;
    int accepted_iteration = -1;
};

/// Raised when no candidate meets the bandwidth and PAPR constraints.
class FilterDesignError : public RuntimeFailure {
public:
    FilterDesignError(const std::string& what, FilterDesignReport report)
        : RuntimeFailure(what), report_(report) {}
    const FilterDesignReport& report() const noexcept { return report_; }

private:
    FilterDesignReport report_;
};

/// Alternates a descent step on the clipped-peak residual of the shaped
/// training stream with re-projection onto the base filter's occupied band.
/// The clip level is annealed from `start_clip_db` to just below the running
/// best PAPR. Deterministic in `seed`.
FilterSpec optimize_tx_filter(const FilterSpec& base, const mapping::ConstellationSpec& constellation,
                              int n_train_blocks, std::uint64_t seed, const FilterDesignOptions& options = {},
                              FilterDesignReport* report = nullptr);

/// Per-block PAPR of a single-carrier stream shaped with `taps`: random
/// symbols drawn from `constellation`, blocks of `block_symbols` symbols
/// (cyclic extension, circular shaping), used by the optimizer and tests.
std::vector<double> single_carrier_block_papr(std::span<const double> taps, int oversampling,
                                              const mapping::ConstellationSpec& constellation,
                                              int n_blocks, int block_symbols, std::uint64_t seed);

}  // namespace subthz::sigcore
