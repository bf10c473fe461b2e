#pragma once

// Internal FFT backend (FFTW, estimate-mode plans cached per size).

#include <span>

#include "subthz/common.hpp"

namespace subthz::detail {

/// Unnormalized transform: sign = -1 forward, +1 inverse. `in` and `out` must not alias.
void fft_raw(std::span<const cplx> in, std::span<cplx> out, int sign);

}  // namespace subthz::detail
