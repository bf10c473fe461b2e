#include "subthz/waveform.hpp"

#include <algorithm>
#include <cmath>

namespace subthz::waveform {

std::string to_string(Waveform w) {
    switch (w) {
        case Waveform::Ofdm: return "ofdm";
        case Waveform::DftsOfdm: return "dfts_ofdm";
        case Waveform::Scfde: return "scfde";
        case Waveform::CpmDftsOfdm: return "cpm_dfts_ofdm";
    }
    return "?";
}

Waveform parse_waveform(const std::string& name) {
    if (name == "ofdm") return Waveform::Ofdm;
    if (name == "dfts_ofdm") return Waveform::DftsOfdm;
    if (name == "scfde") return Waveform::Scfde;
    if (name == "cpm_dfts_ofdm") return Waveform::CpmDftsOfdm;
    throw InvalidArgument("unknown waveform '" + name + "' (expected ofdm, dfts_ofdm, scfde or cpm_dfts_ofdm)");
}

std::string to_string(SubcarrierMapping m) {
    return m == SubcarrierMapping::Localized ? "localized" : "interleaved";
}

SubcarrierMapping parse_mapping(const std::string& name) {
    if (name == "localized") return SubcarrierMapping::Localized;
    if (name == "interleaved") return SubcarrierMapping::Interleaved;
    throw InvalidArgument("unknown subcarrier mapping '" + name + "' (expected localized or interleaved)");
}

void BlockFormat::validate() const {
    require(n_fft >= 1, "BlockFormat: n_fft must be positive");
    require(n_cp >= 0, "BlockFormat: n_cp must be non-negative");
    require(n_alloc >= 1 && n_alloc <= n_fft, "BlockFormat: n_alloc must lie in [1, n_fft]");
    require(oversampling >= 1, "BlockFormat: oversampling must be >= 1");
    require(scs_hz > 0.0 && std::isfinite(scs_hz), "BlockFormat: scs_hz must be positive");
    if (mapping == SubcarrierMapping::Interleaved)
        require(n_fft % n_alloc == 0, "BlockFormat: interleaved mapping needs n_fft divisible by n_alloc");
}

void SlotFormat::validate() const { require(n_blocks >= 1, "SlotFormat: n_blocks must be >= 1"); }

void CpmSpec::validate() const {
    require(h_num > 0 && h_den > 0, "CpmSpec: modulation index must be positive");
    require(samples_per_symbol >= 1 && subsample_factor >= 1, "CpmSpec: sample counts must be positive");
    require(samples_per_symbol % subsample_factor == 0,
            "CpmSpec: subsample_factor must divide samples_per_symbol (at least one sample per symbol)");
}

std::vector<std::size_t> active_bins(const BlockFormat& fmt) {
    fmt.validate();
    const long m = static_cast<long>(fmt.fft_size());
    const long n = fmt.n_fft;
    std::vector<std::size_t> bins(static_cast<std::size_t>(fmt.n_alloc));
    for (long k = 0; k < fmt.n_alloc; ++k) {
        long f;
        if (fmt.mapping == SubcarrierMapping::Localized) {
            f = k - fmt.n_alloc / 2;
        } else {
            f = k * (n / fmt.n_alloc);
            if (f >= n / 2) f -= n;
        }
        bins[static_cast<std::size_t>(k)] = static_cast<std::size_t>(((f % m) + m) % m);
    }
    return bins;
}

double occupied_fraction(const BlockFormat& fmt) {
    fmt.validate();
    return static_cast<double>(fmt.n_alloc) / (static_cast<double>(fmt.n_fft) * fmt.oversampling);
}

namespace {

std::size_t block_count(std::size_t n_symbols, std::size_t per_block, const char* who) {
    require(n_symbols > 0 && n_symbols % per_block == 0,
            std::string(who) + ": symbol count must be a positive multiple of the per-block count");
    return n_symbols / per_block;
}

// Maps per-block bin values to the grid, inverse transform, and prepends the CP.
ComplexSignal multicarrier_blocks(std::span<const cplx> bin_values, const BlockFormat& fmt) {
    const auto bins = active_bins(fmt);
    const std::size_t na = bins.size();
    const std::size_t nb = bin_values.size() / na;
    const std::size_t m = fmt.fft_size();
    const std::size_t cp = fmt.cp_samples();
    CVec out;
    out.reserve(nb * fmt.block_samples());
    CVec grid(m);
    for (std::size_t b = 0; b < nb; ++b) {
        std::fill(grid.begin(), grid.end(), cplx{0.0, 0.0});
        for (std::size_t k = 0; k < na; ++k) grid[bins[k]] = bin_values[b * na + k];
        const CVec body = sigcore::idft(grid);
        out.insert(out.end(), body.end() - static_cast<long>(cp), body.end());
        out.insert(out.end(), body.begin(), body.end());
    }
    return {std::move(out), fmt.sample_rate_hz()};
}

}  // namespace

ComplexSignal ofdm_modulate(std::span<const cplx> symbols, const BlockFormat& fmt) {
    fmt.validate();
    block_count(symbols.size(), static_cast<std::size_t>(fmt.n_alloc), "ofdm_modulate");
    return multicarrier_blocks(symbols, fmt);
}

ComplexSignal dfts_ofdm_modulate(std::span<const cplx> symbols, const BlockFormat& fmt,
                                 const std::optional<RVec>& fd_filter) {
    fmt.validate();
    const std::size_t na = static_cast<std::size_t>(fmt.n_alloc);
    const std::size_t nb = block_count(symbols.size(), na, "dfts_ofdm_modulate");
    if (fd_filter) require(fd_filter->size() == na, "dfts_ofdm_modulate: fd_filter length must equal n_alloc");
    CVec spread(symbols.size());
    for (std::size_t b = 0; b < nb; ++b) {
        CVec s = sigcore::dft(symbols.subspan(b * na, na));
        // Centre the spread spectrum so that its DC bin lands on the allocation's DC.
        if (fmt.mapping == SubcarrierMapping::Localized) std::rotate(s.begin(), s.begin() + static_cast<long>(na - na / 2), s.end());
        if (fd_filter)
            for (std::size_t k = 0; k < na; ++k) s[k] *= (*fd_filter)[k];
        std::copy(s.begin(), s.end(), spread.begin() + static_cast<long>(b * na));
    }
    return multicarrier_blocks(spread, fmt);
}

std::size_t scfde_symbols_per_block(const BlockFormat& fmt, int oversampling) {
    fmt.validate();
    require(oversampling >= 1, "scfde: oversampling must be >= 1");
    require(fmt.fft_size() % static_cast<std::size_t>(oversampling) == 0,
            "scfde: block length not divisible by oversampling");
    return fmt.fft_size() / static_cast<std::size_t>(oversampling);
}

std::size_t scfde_cp_symbols(const BlockFormat& fmt, int oversampling) {
    require(oversampling >= 1, "scfde: oversampling must be >= 1");
    require(fmt.cp_samples() % static_cast<std::size_t>(oversampling) == 0,
            "scfde: CP length not divisible by oversampling");
    return fmt.cp_samples() / static_cast<std::size_t>(oversampling);
}

ScfdeOutput scfde_modulate(std::span<const cplx> symbols, const BlockFormat& fmt, const sigcore::FilterSpec& pulse,
                           int oversampling) {
    const std::size_t ns = scfde_symbols_per_block(fmt, oversampling);
    const std::size_t ncp = scfde_cp_symbols(fmt, oversampling);
    require(pulse.oversampling == oversampling, "scfde_modulate: pulse oversampling must match the modulator");
    const RVec taps = sigcore::filter_taps(pulse);
    const std::size_t nb = block_count(symbols.size(), ns, "scfde_modulate");

    CVec ext;
    ext.reserve(nb * (ns + ncp) + 1);
    for (std::size_t b = 0; b < nb; ++b) {
        auto blk = symbols.subspan(b * ns, ns);
        ext.insert(ext.end(), blk.end() - static_cast<long>(ncp), blk.end());
        ext.insert(ext.end(), blk.begin(), blk.end());
    }
    // The trailing zero symbol pads the stuffed sequence to a whole number of symbol periods.
    ext.push_back(cplx{0.0, 0.0});
    CVec y = sigcore::upsample_filter(ext, taps, oversampling);
    y.resize(nb * fmt.block_samples() + taps.size() - 1);
    return {ComplexSignal(std::move(y), fmt.sample_rate_hz()), (taps.size() - 1) / 2};
}

CVec cpm_precode(std::span<const std::uint8_t> bits, const CpmSpec& spec) {
    spec.validate();
    require(!bits.empty(), "cpm_precode: empty input");
    const int sps = spec.samples_per_symbol;
    const int sub = spec.subsample_factor;
    const double step = kPi * spec.h();
    // Track the accumulated phase as an integer multiple of pi/h_den to avoid drift.
    long acc = 0;
    const long period = 2L * spec.h_den;
    CVec out;
    out.reserve(bits.size() * static_cast<std::size_t>(spec.output_per_symbol()));
    for (std::uint8_t b : bits) {
        require(b <= 1, "cpm_precode: input must be binary");
        const int a = b ? 1 : -1;
        const double theta = kPi * static_cast<double>(acc) / spec.h_den;
        for (int j = sub; j <= sps; j += sub) {
            const double ph = theta + a * step * static_cast<double>(j) / sps;
            out.emplace_back(std::cos(ph), std::sin(ph));
        }
        acc = ((acc + a * spec.h_num) % period + period) % period;
    }
    return out;
}

ComplexSignal assemble_slot(const std::vector<ComplexSignal>& blocks, const SlotFormat& fmt) {
    fmt.validate();
    require(blocks.size() == static_cast<std::size_t>(fmt.n_blocks), "assemble_slot: block count does not match the slot format");
    const double rate = blocks.front().sample_rate_hz();
    CVec out;
    for (const auto& b : blocks) {
        require(b.sample_rate_hz() == rate, "assemble_slot: blocks have different sample rates");
        out.insert(out.end(), b.samples().begin(), b.samples().end());
    }
    return {std::move(out), rate};
}

ComplexSignal multicarrier_compose(const std::vector<Channel>& channels, double composite_rate_hz) {
    require(!channels.empty(), "multicarrier_compose: no channels");
    require(composite_rate_hz > 0.0, "multicarrier_compose: composite rate must be positive");
    std::vector<int> factors;
    for (const auto& ch : channels) {
        const double r = ch.signal.sample_rate_hz();
        const double ratio = composite_rate_hz / r;
        const double rounded = std::round(ratio);
        require(rounded >= 1.0 && std::abs(ratio - rounded) < 1e-9 * ratio,
                "multicarrier_compose: composite rate must be an integer multiple of every channel rate");
        require(std::abs(ch.center_offset_hz) + r / 2.0 <= composite_rate_hz / 2.0 * (1.0 + 1e-12),
                "multicarrier_compose: channel band exceeds the composite Nyquist band");
        factors.push_back(static_cast<int>(rounded));
    }
    for (std::size_t i = 0; i < channels.size(); ++i)
        for (std::size_t j = i + 1; j < channels.size(); ++j) {
            const double gap = std::abs(channels[i].center_offset_hz - channels[j].center_offset_hz);
            const double need = (channels[i].signal.sample_rate_hz() + channels[j].signal.sample_rate_hz()) / 2.0;
            require(gap >= need * (1.0 - 1e-12), "multicarrier_compose: channel bands overlap");
        }

    CVec out;
    for (std::size_t i = 0; i < channels.size(); ++i) {
        const CVec up = sigcore::upsample_bandlimited(channels[i].signal.view(), factors[i]);
        if (up.size() > out.size()) out.resize(up.size(), cplx{0.0, 0.0});
        const double w = 2.0 * kPi * channels[i].center_offset_hz / composite_rate_hz;
        for (std::size_t n = 0; n < up.size(); ++n) {
            // Reduce the phase argument first so long signals keep full precision.
            const double ph = std::remainder(w * static_cast<double>(n), 2.0 * kPi);
            out[n] += up[n] * cplx(std::cos(ph), std::sin(ph));
        }
    }
    return {std::move(out), composite_rate_hz};
}

}  // namespace subthz::waveform
