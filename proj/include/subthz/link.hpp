#pragma once

#include <optional>
#include <string>
#include <vector>

#include "subthz/coding.hpp"
#include "subthz/impair.hpp"
#include "subthz/mapping.hpp"
#include "subthz/rxchain.hpp"
#include "subthz/sigcore.hpp"
#include "subthz/waveform.hpp"

namespace subthz::link {

/// Full description of one simulated link.
///
/// SNR is referenced to the occupied bandwidth of the waveform: the
/// per-sample noise variance is P_rx / (SNR * occupied_fraction), where
/// occupied_fraction is n_alloc / fft_size for the multicarrier waveforms and
/// (1 + roll_off) / oversampling for SC-FDE.
struct LinkConfig {
    waveform::Waveform waveform = waveform::Waveform::Scfde;
    waveform::BlockFormat block{};
    std::string constellation = "qpsk";
    coding::ConvCode code{};
    /// SC-FDE pulse; its oversampling is the SC-FDE samples per symbol.
    sigcore::FilterSpec pulse = sigcore::FilterSpec::rrc(0.22, 16, 2);
    std::optional<RVec> fd_filter;  // DFT-s-OFDM per-bin weights
    waveform::CpmSpec cpm{};

    std::optional<impair::PaModel> pa;
    double opbo_db = 6.0;
    std::optional<impair::PnPsdSpec> pn;
    bool pn_compensation = true;
    int pilots_per_block = 16;  // used whenever phase noise is configured
    std::optional<impair::QuantizerSpec> quantizer;
    CVec channel_taps{cplx{1.0, 0.0}};  // a single unit tap is the AWGN channel
    rxchain::EqualizerMode equalizer = rxchain::EqualizerMode::Mmse;

    std::vector<double> snr_grid_db{0.0};
    std::size_t n_blocks_min = 100000;
    std::size_t n_block_errors_min = 100;
    /// Blocks simulated back to back on one impairment timeline; 0 picks a
    /// size spanning at least 64 us so that slow phase noise is represented.
    std::size_t batch_blocks = 0;
    /// When set, the sweep ends after the first SNR point whose BLER is at or
    /// below this value; later grid points are not simulated or reported.
    std::optional<double> stop_bler;
    std::uint64_t seed = 1;
    int workers = 1;

    void validate() const;
};

struct BlerRecord {
    double snr_db = 0.0;
    std::size_t blocks_sent = 0;
    std::size_t block_errors = 0;
    double bler = 0.0;
    double ber = 0.0;
    double evm_percent = 0.0;
};

/// Derived per-block quantities, exposed for reporting and tests.
struct LinkGeometry {
    std::size_t symbols_per_block;  // modulation symbols (or CPM bits) per block
    std::size_t data_symbols;       // after pilots
    std::size_t coded_bits;         // capacity in coded bits
    std::size_t info_bits;
    double occupied_fraction;
    std::size_t batch_blocks;
};

LinkGeometry link_geometry(const LinkConfig& cfg);

/// Monte Carlo BLER sweep over cfg.snr_grid_db. Results are a pure function of
/// the config (including the seed) and do not depend on cfg.workers.
std::vector<BlerRecord> run_link(const LinkConfig& cfg);

/// SNR where the BLER curve first crosses `target`, interpolated linearly in
/// log10(BLER). Empty when no grid point reaches the target. When the first
/// point is already at or below the target, its SNR is returned (an upper bound).
std::optional<double> snr_at_target_bler(const std::vector<BlerRecord>& records, double target = 0.1);

/// Error raised by a link stage, naming the stage.
class StageError : public RuntimeFailure {
public:
    StageError(const std::string& stage, const std::string& what)
        : RuntimeFailure("link stage '" + stage + "': " + what), stage_(stage) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace subthz::link
