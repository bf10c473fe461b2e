#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "subthz/common.hpp"
#include "subthz/sigcore.hpp"

namespace subthz::zxm {

/// Exact sequence counts; overflow raises instead of wrapping.
using Count = unsigned __int128;

std::string to_string(Count v);

struct RunlengthSpec {
    int min_run = 2;          // r: minimum number of equal symbols between sign changes
    int block_symbols = 128;  // FTN-rate symbols per block
    int ftn_factor = 2;       // M_tx: FTN symbols per Nyquist interval of the pulse

    void validate() const;
};

/// Length-n sequences of +-1 starting with +1 whose runs, the last one
/// included, all have length >= r.
Count rl_count(int n, const RunlengthSpec& spec);

/// floor(log2(rl_count(block_symbols))): payload bits carried per block.
int rl_payload_bits(const RunlengthSpec& spec);

/// Enumerative coding: the payload (first bit most significant) is the rank of
/// the sequence in lexicographic order with -1 < +1.
std::vector<std::int8_t> rl_encode(std::span<const std::uint8_t> bits, const RunlengthSpec& spec);
Bits rl_decode(std::span<const std::int8_t> sequence, const RunlengthSpec& spec);

/// Lexicographic rank of a constrained sequence; throws if the sequence
/// violates the constraint.
Count rl_rank(std::span<const std::int8_t> sequence, const RunlengthSpec& spec);

/// True when the sequence starts with +1 and all runs have length >= r.
bool rl_valid(std::span<const std::int8_t> sequence, int min_run);

/// log2 of the spectral radius of the constraint graph, by power iteration.
double rl_capacity(int min_run);
/// ftn_factor * rl_capacity(min_run): bits per Nyquist interval per real dimension.
double zxm_rate(const RunlengthSpec& spec);

struct ZxmFrame {
    Bits payload;
    std::vector<std::int8_t> symbols;
    ComplexSignal signal;  // real-valued (imaginary part zero), pulse.oversampling samples per Nyquist interval
};

/// Fine samples per FTN symbol: pulse.oversampling / ftn_factor.
int samples_per_symbol(const RunlengthSpec& spec, const sigcore::FilterSpec& pulse);

/// Runlength encoding, FTN spacing of the +-1 symbols, and full convolution
/// with the pulse. Output length block_symbols * samples_per_symbol + taps - 1.
ZxmFrame zxm_construct(std::span<const std::uint8_t> bits, const RunlengthSpec& spec, const sigcore::FilterSpec& pulse,
                       double nyquist_rate_hz = 1.0);

struct DetectorOptions {
    /// Standard deviation of the real-rail noise before quantization.
    double noise_std = 1e-3;
    /// Pulse memory kept in the trellis, in FTN symbols.
    int memory_symbols = 8;
    std::size_t max_states = 1u << 20;
};

struct Detection {
    std::vector<std::int8_t> symbols;
    double log_metric;  // sum of log-probabilities of the observed signs
    Bits payload;
};

/// Pulse taps as seen by the detector (centred truncation to memory * sps + 1 taps).
RVec detector_taps(const RunlengthSpec& spec, const sigcore::FilterSpec& pulse, const DetectorOptions& opt = {});

/// Sample indices (at the construction rate) that the detector observes.
std::vector<std::size_t> observation_indices(const RunlengthSpec& spec, const sigcore::FilterSpec& pulse,
                                             int rx_oversample, std::size_t signal_length,
                                             const DetectorOptions& opt = {});

/// log P(sign pattern | symbols) under the detector's truncated-pulse model.
double sequence_log_metric(std::span<const std::int8_t> symbols, std::span<const double> observed_signs,
                           const RunlengthSpec& spec, const sigcore::FilterSpec& pulse, int rx_oversample,
                           const DetectorOptions& opt = {});

/// Viterbi detection on a 1-bit quantized real rail sampled at the
/// construction rate; rx_oversample observations per FTN symbol are used.
Detection zxm_detect_sequence(const ComplexSignal& received, const RunlengthSpec& spec,
                              const sigcore::FilterSpec& pulse, int rx_oversample, const DetectorOptions& opt = {});

/// Payload bits of the detected sequence (rank reduced modulo 2^payload_bits).
Bits zxm_detect(const ComplexSignal& received, const RunlengthSpec& spec, const sigcore::FilterSpec& pulse,
                int rx_oversample, const DetectorOptions& opt = {});

/// Natural log of the standard normal CDF, accurate far into the lower tail.
double log_normal_cdf(double x);

}  // namespace subthz::zxm
