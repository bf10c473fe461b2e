#pragma once

#include <string>

#include "subthz/common.hpp"
#include "subthz/waveform.hpp"

namespace subthz::rxchain {

enum class EqualizerMode { ZeroForcing, Mmse };

std::string to_string(EqualizerMode m);
EqualizerMode parse_equalizer(const std::string& name);

/// Per-bin equalization: Y/H (zf) or conj(H) Y / (|H|^2 + noise_var) (mmse).
CVec fde_equalize(std::span<const cplx> y_fd, std::span<const cplx> h_fd, EqualizerMode mode, double noise_var);

struct CpeResult {
    CVec symbols;
    double phase_estimate;  // radians
};

/// Estimates the common phase from pilots and derotates the whole block.
CpeResult cpe_compensate(std::span<const cplx> block_symbols, std::span<const std::size_t> pilot_positions,
                         std::span<const cplx> pilot_refs);

/// Maximum-likelihood (Euclidean) sequence detection over the CPM phase
/// trellis, starting from phase zero.
Bits cpm_detect(std::span<const cplx> symbols, const waveform::CpmSpec& spec);

}  // namespace subthz::rxchain
