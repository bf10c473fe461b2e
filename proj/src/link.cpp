#include "subthz/link.hpp"

#include <algorithm>
#include <cmath>

#include "fft.hpp"

namespace subthz::link {

using waveform::Waveform;

void LinkConfig::validate() const {
    block.validate();
    require(!snr_grid_db.empty(), "LinkConfig: SNR grid must be nonempty");
    for (std::size_t i = 0; i < snr_grid_db.size(); ++i) {
        require(std::isfinite(snr_grid_db[i]), "LinkConfig: SNR values must be finite");
        if (i > 0) require(snr_grid_db[i] > snr_grid_db[i - 1], "LinkConfig: SNR grid must be strictly ascending");
    }
    require(n_blocks_min >= 1 && n_block_errors_min >= 1, "LinkConfig: stopping rule must be positive");
    require(workers >= 1, "LinkConfig: workers must be >= 1");
    require(!channel_taps.empty(), "LinkConfig: channel needs at least one tap");
    require(!stop_bler || (*stop_bler >= 0.0 && *stop_bler < 1.0), "LinkConfig: stop_bler must lie in [0, 1)");
    code.validate();
    mapping::constellation_by_name(constellation);
    if (pa) {
        pa->validate();
        require(opbo_db >= 0.0, "LinkConfig: OPBO target must be >= 0 dB");
    }
    if (pn) pn->validate();
    if (quantizer) {
        quantizer->validate();
        require(quantizer->oversample_factor == 1, "LinkConfig: the link quantizer must not oversample");
    }
    require(pilots_per_block >= 1, "LinkConfig: at least one pilot per block is required");
    if (waveform == Waveform::Scfde) {
        pulse.validate();
        waveform::scfde_symbols_per_block(block, pulse.oversampling);
        waveform::scfde_cp_symbols(block, pulse.oversampling);
    }
    if (waveform == Waveform::CpmDftsOfdm) {
        cpm.validate();
        require(block.n_alloc % cpm.output_per_symbol() == 0,
                "LinkConfig: n_alloc must be a multiple of the CPM samples per bit");
    }
    if (fd_filter) require(fd_filter->size() == static_cast<std::size_t>(block.n_alloc), "LinkConfig: fd_filter length must equal n_alloc");
}

LinkGeometry link_geometry(const LinkConfig& cfg) {
    cfg.validate();
    LinkGeometry g{};
    const bool pilots = cfg.pn.has_value() && cfg.waveform != Waveform::CpmDftsOfdm;
    if (cfg.waveform == Waveform::Scfde) {
        g.symbols_per_block = waveform::scfde_symbols_per_block(cfg.block, cfg.pulse.oversampling);
        const double bw = cfg.pulse.kind == sigcore::FilterKind::RootRaisedCosine
                              ? 1.0 + cfg.pulse.roll_off
                              : sigcore::occupied_bandwidth(cfg.pulse.taps, cfg.pulse.oversampling);
        g.occupied_fraction = bw / cfg.pulse.oversampling;
    } else {
        g.symbols_per_block = static_cast<std::size_t>(cfg.block.n_alloc);
        g.occupied_fraction = waveform::occupied_fraction(cfg.block);
    }
    if (cfg.waveform == Waveform::CpmDftsOfdm) {
        g.data_symbols = g.symbols_per_block / static_cast<std::size_t>(cfg.cpm.output_per_symbol());
        g.coded_bits = g.data_symbols;
    } else {
        const std::size_t np = pilots ? static_cast<std::size_t>(cfg.pilots_per_block) : 0;
        require(np < g.symbols_per_block, "LinkConfig: pilots fill the whole block");
        g.data_symbols = g.symbols_per_block - np;
        g.coded_bits = g.data_symbols * mapping::constellation_by_name(cfg.constellation).bits_per_symbol();
    }
    g.info_bits = coding::max_info_bits(g.coded_bits, cfg.code);
    require(g.info_bits >= 1, "LinkConfig: block too small for the code");
    if (cfg.batch_blocks > 0) {
        g.batch_blocks = cfg.batch_blocks;
    } else if (cfg.pn) {
        const double t_block = static_cast<double>(cfg.block.block_samples()) / cfg.block.sample_rate_hz();
        g.batch_blocks = static_cast<std::size_t>(std::ceil(64e-6 / t_block));
    } else {
        g.batch_blocks = 8;
    }
    return g;
}

namespace {

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

CVec unnormalized_fft(const CVec& x) {
    CVec out(x.size());
    detail::fft_raw(x, out, -1);
    return out;
}

struct BlockOutcome {
    bool error = false;
    std::size_t bit_errors = 0;
    double err_energy = 0.0;
    double sig_energy = 0.0;
};

// Everything fixed for the lifetime of one run_link call.
struct Prepared {
    LinkConfig cfg;
    LinkGeometry geo;
    mapping::ConstellationSpec con;
    bool pilots = false;
    RVec taps;  // SC-FDE pulse
    int os = 1;
    std::size_t ns = 0, ncp = 0, delay_symbols = 0;
    std::vector<std::size_t> bins;
    CVec chan_fft;       // channel over the fft_size() grid
    CVec h_eff;          // per-bin effective channel in the symbol domain (gain applied)
    RVec noise_shape;    // per-bin noise variance per unit sample noise variance
    double pa_scale = 1.0;
    cplx pa_gain{1.0, 0.0};
    double p_ref = 1.0;
    double distortion_var = 0.0;
};

struct TxBatch {
    CVec samples;
    std::vector<CVec> symbols;  // per block, pilots included
    std::vector<Bits> info;
};

TxBatch transmit(const Prepared& p, Rng& rng, std::size_t n_blocks) {
    const auto& cfg = p.cfg;
    TxBatch tx;
    CVec all;
    all.reserve(n_blocks * p.geo.symbols_per_block);
    for (std::size_t b = 0; b < n_blocks; ++b) {
        Bits info = rng.bits(p.geo.info_bits);
        Bits coded = stage("encode", [&] { return coding::conv_encode(info, cfg.code); });
        while (coded.size() < p.geo.coded_bits) coded.push_back(rng.bit());
        CVec sym;
        if (cfg.waveform == Waveform::CpmDftsOfdm) {
            sym = stage("cpm_precode", [&] { return waveform::cpm_precode(coded, cfg.cpm); });
        } else {
            if (p.pilots)
                for (int i = 0; i < cfg.pilots_per_block; ++i)
                    sym.push_back(std::polar(1.0, kPi / 4.0 + kPi / 2.0 * static_cast<double>(rng.next_u64() & 3u)));
            const CVec data = stage("map", [&] { return mapping::map_bits(coded, p.con); });
            sym.insert(sym.end(), data.begin(), data.end());
        }
        all.insert(all.end(), sym.begin(), sym.end());
        tx.symbols.push_back(std::move(sym));
        tx.info.push_back(std::move(info));
    }
    tx.samples = stage("modulate", [&]() -> CVec {
        switch (cfg.waveform) {
            case Waveform::Ofdm: return std::move(waveform::ofdm_modulate(all, cfg.block)).take();
            case Waveform::DftsOfdm:
            case Waveform::CpmDftsOfdm:
                return std::move(waveform::dfts_ofdm_modulate(all, cfg.block, cfg.fd_filter)).take();
            case Waveform::Scfde:
                return std::move(waveform::scfde_modulate(all, cfg.block, cfg.pulse, p.os).signal).take();
        }
        return {};
    });
    return tx;
}

CVec apply_channel(const CVec& x, const CVec& taps) {
    if (taps.size() == 1 && taps[0] == cplx{1.0, 0.0}) return x;
    CVec y(x.size() + taps.size() - 1, cplx{0.0, 0.0});
    for (std::size_t n = 0; n < x.size(); ++n)
        for (std::size_t i = 0; i < taps.size(); ++i) y[n + i] += x[n] * taps[i];
    return y;
}

struct Equalized {
    CVec symbols;
    RVec noise_var;  // per symbol
};

// Receiver front end for block b: CP removal, transform, FDE, back to symbols.
Equalized receive_block(const Prepared& p, const CVec& y, std::size_t b, double nv) {
    const auto& cfg = p.cfg;
    const bool mc = cfg.waveform != Waveform::Scfde;
    const std::size_t n = mc ? p.bins.size() : p.ns;
    CVec r(n);
    if (mc) {
        const std::size_t m = cfg.block.fft_size();
        const std::size_t start = b * cfg.block.block_samples() + cfg.block.cp_samples();
        const CVec body = sigcore::dft(std::span<const cplx>(y.data() + start, m));
        for (std::size_t k = 0; k < n; ++k) r[k] = body[p.bins[k]];
    } else {
        // Matched filter evaluated only at the symbol instants of the window.
        const std::size_t len = p.taps.size();
        const std::size_t m0 = b * (p.ns + p.ncp) + p.ncp - p.delay_symbols;
        CVec t(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t at = (len - 1) + (m0 + i) * static_cast<std::size_t>(p.os);
            cplx acc{0.0, 0.0};
            for (std::size_t k = 0; k < len; ++k)
                if (at >= k && at - k < y.size()) acc += p.taps[k] * y[at - k];
            t[i] = acc;
        }
        r = sigcore::dft(t);
    }

    Equalized out;
    if (cfg.waveform == Waveform::Ofdm) {
        out.symbols.resize(n);
        out.noise_var.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            const cplx h = p.h_eff[k];
            require(std::norm(h) > 0.0, "zero channel bin");
            out.symbols[k] = r[k] / h;
            out.noise_var[k] = nv * p.noise_shape[k] / std::norm(h) + p.distortion_var;
        }
        return out;
    }
    RVec bin_nv(n);
    for (std::size_t k = 0; k < n; ++k) bin_nv[k] = nv * p.noise_shape[k];
    CVec z(n);
    double scalar_nv = 0.0;
    if (cfg.equalizer == rxchain::EqualizerMode::ZeroForcing || nv == 0.0) {
        z = rxchain::fde_equalize(r, p.h_eff, rxchain::EqualizerMode::ZeroForcing, 0.0);
        for (std::size_t k = 0; k < n; ++k) scalar_nv += bin_nv[k] / std::norm(p.h_eff[k]);
        scalar_nv /= static_cast<double>(n);
    } else {
        double mu = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double g = std::norm(p.h_eff[k]);
            z[k] = std::conj(p.h_eff[k]) * r[k] / (g + bin_nv[k]);
            mu += g / (g + bin_nv[k]);
        }
        mu /= static_cast<double>(n);
        // Unbiased MMSE: scale the estimate back to unit gain.
        for (auto& v : z) v /= mu;
        scalar_nv = 1.0 / mu - 1.0;
    }
    if (mc) {
        if (cfg.block.mapping == waveform::SubcarrierMapping::Localized)
            std::rotate(z.begin(), z.begin() + static_cast<long>(n / 2), z.end());
    }
    out.symbols = sigcore::idft(z);
    out.noise_var.assign(n, scalar_nv + p.distortion_var);
    return out;
}

std::vector<BlockOutcome> simulate_batch(const Prepared& p, double nv, std::uint64_t seed, bool with_pn,
                                         double* distortion_out) {
    const auto& cfg = p.cfg;
    const std::size_t nb = p.geo.batch_blocks;
    Rng rng(seed);
    TxBatch tx = transmit(p, rng, nb);
    CVec x = std::move(tx.samples);

    if (cfg.pa) {
        for (auto& v : x) v *= p.pa_scale;
        x = stage("pa", [&] { return impair::pa_apply(x, *cfg.pa); });
    }
    if (with_pn && cfg.pn) {
        const RVec phase = stage("phase_noise", [&] {
            return impair::pn_generate(*cfg.pn, cfg.block.sample_rate_hz(), x.size(), derive_seed(seed, {1}));
        });
        impair::pn_apply_inplace(x, phase);
    }
    CVec y = stage("channel", [&] { return apply_channel(x, cfg.channel_taps); });
    if (nv > 0.0) {
        Rng noise_rng(derive_seed(seed, {2}));
        impair::add_noise(y, nv, noise_rng);
    }
    if (cfg.quantizer) {
        y = stage("quantize", [&] {
            return std::move(impair::quantize(ComplexSignal(y, cfg.block.sample_rate_hz()), *cfg.quantizer)).take();
        });
    }

    std::vector<BlockOutcome> out(nb);
    double dist_acc = 0.0;
    std::size_t dist_n = 0;
    const std::size_t np = p.pilots ? static_cast<std::size_t>(cfg.pilots_per_block) : 0;
    for (std::size_t b = 0; b < nb; ++b) {
        Equalized eq = stage("equalize", [&] { return receive_block(p, y, b, nv); });
        const CVec& ref = tx.symbols[b];
        if (p.pilots && with_pn && cfg.pn_compensation) {
            std::vector<std::size_t> pos(np);
            for (std::size_t i = 0; i < np; ++i) pos[i] = i;
            eq.symbols = stage("cpe", [&] {
                return rxchain::cpe_compensate(eq.symbols, pos, std::span<const cplx>(ref.data(), np)).symbols;
            });
        }
        auto& o = out[b];
        for (std::size_t i = np; i < ref.size(); ++i) {
            o.err_energy += std::norm(eq.symbols[i] - ref[i]);
            o.sig_energy += std::norm(ref[i]);
        }
        dist_acc += o.err_energy;
        dist_n += ref.size() - np;
        if (distortion_out) continue;

        RVec llr;
        if (cfg.waveform == Waveform::CpmDftsOfdm) {
            const Bits hard = stage("cpm_detect", [&] { return rxchain::cpm_detect(eq.symbols, cfg.cpm); });
            llr.resize(hard.size());
            for (std::size_t i = 0; i < hard.size(); ++i) llr[i] = hard[i] ? -1.0 : 1.0;
        } else {
            std::span<const cplx> data(eq.symbols.data() + np, ref.size() - np);
            std::span<const double> nvs(eq.noise_var.data() + np, ref.size() - np);
            llr = stage("demap", [&] { return mapping::demap_llr(data, p.con, nvs); });
        }
        llr.resize(coding::coded_length(p.geo.info_bits, cfg.code));
        const Bits dec = stage("decode", [&] { return coding::viterbi_decode(llr, cfg.code); });
        for (std::size_t i = 0; i < dec.size(); ++i) o.bit_errors += dec[i] != tx.info[b][i];
        o.error = o.bit_errors > 0;
    }
    if (distortion_out) *distortion_out = dist_n ? dist_acc / static_cast<double>(dist_n) : 0.0;
    return out;
}

Prepared prepare(const LinkConfig& cfg) {
    Prepared p;
    p.cfg = cfg;
    p.geo = link_geometry(cfg);
    p.con = mapping::constellation_by_name(cfg.constellation);
    p.pilots = cfg.pn.has_value() && cfg.waveform != Waveform::CpmDftsOfdm;
    const std::size_t m = cfg.block.fft_size();

    if (cfg.waveform == Waveform::Scfde) {
        p.os = cfg.pulse.oversampling;
        p.taps = sigcore::filter_taps(cfg.pulse);
        p.ns = waveform::scfde_symbols_per_block(cfg.block, p.os);
        p.ncp = waveform::scfde_cp_symbols(cfg.block, p.os);
    } else {
        p.bins = waveform::active_bins(cfg.block);
        require(cfg.channel_taps.size() - 1 <= cfg.block.cp_samples(), "LinkConfig: channel longer than the cyclic prefix");
        CVec padded(m, cplx{0.0, 0.0});
        for (std::size_t i = 0; i < cfg.channel_taps.size(); ++i) padded[i] = cfg.channel_taps[i];
        p.chan_fft = unnormalized_fft(padded);
    }

    // Calibration batch: transmit scale for the OPBO target, Bussgang gain of
    // the amplifier, and the received reference power.
    const std::uint64_t cal_seed = derive_seed(cfg.seed, {0xC0FFEEULL});
    {
        Rng rng(cal_seed);
        TxBatch tx = transmit(p, rng, p.geo.batch_blocks);
        CVec x = tx.samples;
        if (cfg.pa) {
            p.pa_scale = stage("pa", [&] { return impair::opbo_scale(x, *cfg.pa, cfg.opbo_db); });
            CVec scaled = x;
            for (auto& v : scaled) v *= p.pa_scale;
            const CVec out = impair::pa_apply(scaled, *cfg.pa);
            cplx num{0.0, 0.0};
            double den = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                num += out[i] * std::conj(x[i]);
                den += std::norm(x[i]);
            }
            p.pa_gain = num / den;
            x = out;
        }
        p.p_ref = mean_power(apply_channel(x, cfg.channel_taps));
    }

    if (cfg.waveform == Waveform::Scfde) {
        const std::size_t len = p.taps.size();
        // p (*) h (*) p, peak of the direct path at index len - 1.
        CVec ph(len + cfg.channel_taps.size() - 1, cplx{0.0, 0.0});
        for (std::size_t i = 0; i < len; ++i)
            for (std::size_t j = 0; j < cfg.channel_taps.size(); ++j) ph[i + j] += p.taps[i] * cfg.channel_taps[j];
        CVec g(ph.size() + len - 1, cplx{0.0, 0.0});
        for (std::size_t i = 0; i < ph.size(); ++i)
            for (std::size_t j = 0; j < len; ++j) g[i + j] += ph[i] * p.taps[j];
        RVec pp(2 * len - 1, 0.0);
        for (std::size_t i = 0; i < len; ++i)
            for (std::size_t j = 0; j < len; ++j) pp[i + j] += p.taps[i] * p.taps[j];

        const long c = static_cast<long>(len - 1);
        const long os = p.os;
        const long pre = c / os;
        const long post = (static_cast<long>(g.size()) - 1 - c) / os;
        p.delay_symbols = static_cast<std::size_t>(pre);
        require(static_cast<std::size_t>(pre + post) <= p.ncp, "LinkConfig: pulse and channel memory exceed the cyclic prefix");
        const long ns = static_cast<long>(p.ns);
        CVec circ(p.ns, cplx{0.0, 0.0});
        CVec rho(p.ns, cplx{0.0, 0.0});
        for (long j = -pre; j <= post; ++j) {
            circ[static_cast<std::size_t>(((pre + j) % ns + ns) % ns)] += g[static_cast<std::size_t>(c + j * os)];
        }
        for (long j = -pre; j <= pre; ++j) rho[static_cast<std::size_t>((j % ns + ns) % ns)] += pp[static_cast<std::size_t>(c + j * os)];
        p.h_eff = unnormalized_fft(circ);
        const CVec shape = unnormalized_fft(rho);
        p.noise_shape.resize(p.ns);
        for (std::size_t k = 0; k < p.ns; ++k) p.noise_shape[k] = std::max(shape[k].real(), 1e-300);
    } else {
        const std::size_t n = p.bins.size();
        p.h_eff.resize(n);
        p.noise_shape.assign(n, 1.0);
        for (std::size_t k = 0; k < n; ++k) p.h_eff[k] = p.chan_fft[p.bins[k]];
        if (cfg.waveform != Waveform::Ofdm && cfg.fd_filter) {
            // Weights are applied in spread order; map them onto the bins they occupy.
            RVec w = *cfg.fd_filter;
            if (cfg.block.mapping == waveform::SubcarrierMapping::Localized)
                std::rotate(w.begin(), w.begin() + static_cast<long>(n - n / 2), w.end());
            for (std::size_t k = 0; k < n; ++k) p.h_eff[k] *= w[k];
        }
    }
    for (auto& h : p.h_eff) h *= p.pa_gain;

    // Residual error of a noiseless, phase-noise-free pass: amplifier distortion
    // seen by the detector, added to the thermal noise variance in the LLRs.
    if (cfg.pa) {
        double d = 0.0;
        stage("calibrate", [&] { return simulate_batch(p, 0.0, cal_seed, false, &d); });
        p.distortion_var = d;
    }
    return p;
}

}  // namespace

std::vector<BlerRecord> run_link(const LinkConfig& cfg) {
    cfg.validate();
    const Prepared p = prepare(cfg);
    std::vector<BlerRecord> records;
    const std::size_t wave = static_cast<std::size_t>(std::max(1, cfg.workers)) * 2;

    for (std::size_t si = 0; si < cfg.snr_grid_db.size(); ++si) {
        const double snr = cfg.snr_grid_db[si];
        const double nv = p.p_ref / (std::pow(10.0, snr / 10.0) * p.geo.occupied_fraction);
        BlerRecord rec;
        rec.snr_db = snr;
        std::size_t bit_errors = 0;
        double err = 0.0, sig = 0.0;
        bool done = false;
        for (std::size_t first = 0; !done; first += wave) {
            std::vector<std::vector<BlockOutcome>> results(wave);
            parallel_for(wave, cfg.workers, [&](std::size_t i) {
                results[i] = simulate_batch(p, nv, derive_seed(cfg.seed, {si, first + i}), true, nullptr);
            });
            // Fold in batch and block order; the stopping point never depends on scheduling.
            for (const auto& batch : results) {
                for (const auto& o : batch) {
                    ++rec.blocks_sent;
                    rec.block_errors += o.error ? 1 : 0;
                    bit_errors += o.bit_errors;
                    err += o.err_energy;
                    sig += o.sig_energy;
                    if (rec.block_errors >= cfg.n_block_errors_min || rec.blocks_sent >= cfg.n_blocks_min) {
                        done = true;
                        break;
                    }
                }
                if (done) break;
            }
        }
        rec.bler = static_cast<double>(rec.block_errors) / static_cast<double>(rec.blocks_sent);
        rec.ber = static_cast<double>(bit_errors) / (static_cast<double>(rec.blocks_sent) * p.geo.info_bits);
        rec.evm_percent = sig > 0.0 ? 100.0 * std::sqrt(err / sig) : 0.0;
        records.push_back(rec);
        if (cfg.stop_bler && rec.bler <= *cfg.stop_bler) break;
    }
    return records;
}

std::optional<double> snr_at_target_bler(const std::vector<BlerRecord>& records, double target) {
    require(!records.empty(), "snr_at_target_bler: empty records");
    require(target > 0.0 && target < 1.0, "snr_at_target_bler: target must lie in (0, 1)");
    if (records.front().bler <= target) return records.front().snr_db;
    for (std::size_t i = 1; i < records.size(); ++i) {
        const auto& a = records[i - 1];
        const auto& b = records[i];
        if (b.bler > target) continue;
        if (b.bler == target) return b.snr_db;
        // A zero count is replaced by half an error so the logarithm stays finite.
        const double lb = std::log10(std::max(b.bler, 0.5 / static_cast<double>(std::max<std::size_t>(b.blocks_sent, 1))));
        const double lb_capped = std::min(lb, std::log10(target));
        const double la = std::log10(a.bler);
        const double t = (std::log10(target) - la) / (lb_capped - la);
        return a.snr_db + t * (b.snr_db - a.snr_db);
    }
    return std::nullopt;
}

}  // namespace subthz::link
