#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "subthz/common.hpp"
#include "subthz/sigcore.hpp"

namespace subthz::waveform {

enum class Waveform { Ofdm, DftsOfdm, Scfde, CpmDftsOfdm };

std::string to_string(Waveform w);
/// Accepts "ofdm", "dfts_ofdm", "scfde", "cpm_dfts_ofdm".
Waveform parse_waveform(const std::string& name);

enum class SubcarrierMapping { Localized, Interleaved };

std::string to_string(SubcarrierMapping m);
SubcarrierMapping parse_mapping(const std::string& name);

/// One cyclic-prefixed block.
///
/// `oversampling` scales the transform size and CP alike (n_fft*oversampling
/// point IFFT), so every waveform built from the same format shares the sample
/// rate scs_hz * n_fft * oversampling and the block length
/// (n_fft + n_cp) * oversampling.
struct BlockFormat {
    int n_fft = 2048;
    int n_cp = 144;
    int n_alloc = 1228;
    SubcarrierMapping mapping = SubcarrierMapping::Localized;
    int oversampling = 1;
    double scs_hz = 480e3;

    void validate() const;
    double sample_rate_hz() const noexcept { return scs_hz * n_fft * oversampling; }
    std::size_t fft_size() const noexcept { return static_cast<std::size_t>(n_fft) * oversampling; }
    std::size_t cp_samples() const noexcept { return static_cast<std::size_t>(n_cp) * oversampling; }
    std::size_t block_samples() const noexcept { return fft_size() + cp_samples(); }
};

struct SlotFormat {
    int n_blocks = 2;
    void validate() const;
};

/// Binary full-response CPFSK with modulation index h = h_num / h_den.
///
/// The phase is sampled `samples_per_symbol` times per symbol (at the end of
/// each sub-interval) and every `subsample_factor`-th sample is kept.
struct CpmSpec {
    int h_num = 1;
    int h_den = 2;
    int samples_per_symbol = 4;
    int subsample_factor = 2;

    void validate() const;
    double h() const noexcept { return static_cast<double>(h_num) / h_den; }
    int output_per_symbol() const noexcept { return samples_per_symbol / subsample_factor; }
    /// Number of distinct phase states (multiples of pi / h_den).
    int phase_states() const noexcept { return 2 * h_den; }
};

/// Indices into the fft_size() grid of the n_alloc active bins, in data order.
std::vector<std::size_t> active_bins(const BlockFormat& fmt);

/// Fraction of the sample-rate band occupied by the allocation.
double occupied_fraction(const BlockFormat& fmt);

ComplexSignal ofdm_modulate(std::span<const cplx> symbols, const BlockFormat& fmt);

/// `fd_filter`, when given, weights the n_alloc spread bins before mapping.
ComplexSignal dfts_ofdm_modulate(std::span<const cplx> symbols, const BlockFormat& fmt,
                                 const std::optional<RVec>& fd_filter = std::nullopt);

struct ScfdeOutput {
    ComplexSignal signal;
    /// Samples between a symbol instant at the modulator input and its pulse peak.
    std::size_t group_delay;
};

/// Symbols carried by one SC-FDE block at `oversampling` samples per symbol.
std::size_t scfde_symbols_per_block(const BlockFormat& fmt, int oversampling);
std::size_t scfde_cp_symbols(const BlockFormat& fmt, int oversampling);

/// Cyclic prefix in the symbol domain, then pulse shaping as one full
/// convolution over all blocks. The output holds n_blocks * block_samples()
/// + taps - 1 samples; block b's first CP sample peaks at group_delay + b * block_samples().
ScfdeOutput scfde_modulate(std::span<const cplx> symbols, const BlockFormat& fmt, const sigcore::FilterSpec& pulse,
                           int oversampling);

/// Unit-modulus CPM samples, output_per_symbol() per input bit. Bit 0 maps to
/// a phase step of -pi*h, bit 1 to +pi*h; the initial phase is zero.
CVec cpm_precode(std::span<const std::uint8_t> bits, const CpmSpec& spec);

ComplexSignal assemble_slot(const std::vector<ComplexSignal>& blocks, const SlotFormat& fmt);

struct Channel {
    ComplexSignal signal;
    double center_offset_hz;
};

/// Band-limited upsampling of each channel to the composite rate (integer
/// ratio), frequency shift, and sum.
ComplexSignal multicarrier_compose(const std::vector<Channel>& channels, double composite_rate_hz);

}  // namespace subthz::waveform
