#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "subthz/harness.hpp"

namespace subthz::harness {

namespace fs = std::filesystem;
using waveform::Waveform;

namespace {

class Csv {
public:
    explicit Csv(std::vector<std::string> header) : header_(std::move(header)) {}

    void row(std::vector<std::string> cells) {
        require(cells.size() == header_.size(), "csv: row width differs from the header");
        rows_.push_back(std::move(cells));
    }

    std::string text(const std::string& trailer) const {
        std::string out;
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                if (i) out += ',';
                out += cells[i];
            }
            out += '\n';
        };
        line(header_);
        for (const auto& r : rows_) line(r);
        out += trailer;
        out += '\n';
        return out;
    }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

std::string num(double v) { return format_double(v); }
std::string num(std::size_t v) { return std::to_string(v); }
std::string opt_num(const std::optional<double>& v, int digits = -1) {
    if (!v) return "NA";
    return digits < 0 ? format_double(*v) : format_fixed(*v, digits);
}

// Output directory bookkeeping: every file written is tracked so a failed run
// can remove them again.
class Outputs {
public:
    Outputs(fs::path dir, std::string trailer) : dir_(std::move(dir)), trailer_(std::move(trailer)) {}

    void write_csv(const std::string& name, const Csv& csv) { write(name, csv.text(trailer_)); }

    void write(const std::string& name, const std::string& content) {
        const fs::path p = dir_ / name;
        written_.push_back(p);
        std::ofstream f(p, std::ios::binary | std::ios::trunc);
        if (!f) throw RuntimeFailure("cannot open '" + p.string() + "' for writing");
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!f) throw RuntimeFailure("write to '" + p.string() + "' failed");
        files_.push_back({name, sha256_hex(content), content.size()});
    }

    void remove_all() noexcept {
        for (const auto& p : written_) {
            std::error_code ec;
            fs::remove(p, ec);
        }
        written_.clear();
    }

    const std::vector<OutputFile>& files() const { return files_; }
    const std::string& trailer() const { return trailer_; }

private:
    fs::path dir_;
    std::string trailer_;
    std::vector<fs::path> written_;
    std::vector<OutputFile> files_;
};

template <class F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const RunError&) {
        throw;
    } catch (const std::exception& e) {
        throw RunError(name, e.what());
    }
}

void add_record_row(Csv& csv, std::vector<std::string> prefix, const link::BlerRecord& r) {
    for (auto s : {num(r.snr_db), num(r.blocks_sent), num(r.block_errors), num(r.bler), num(r.ber), num(r.evm_percent)})
        prefix.push_back(s);
    csv.row(std::move(prefix));
}

const std::vector<std::string> kRecordColumns{"snr_db", "blocks", "errors", "bler", "ber", "evm_percent"};

std::vector<std::string> with_records(std::vector<std::string> head) {
    head.insert(head.end(), kRecordColumns.begin(), kRecordColumns.end());
    return head;
}

// ---------------------------------------------------------------------------
// PAPR
// ---------------------------------------------------------------------------

struct PaprSeries {
    std::string label;
    Waveform wf;
    bool optimized;
    mapping::ConstellationSpec con;
};

constexpr std::size_t kPaprChunk = 64;

// Per-block PAPR of `count` blocks, each measured over its block window.
std::vector<double> papr_chunk(const PaprSeries& s, const waveform::BlockFormat& fmt,
                               const sigcore::FilterSpec& pulse, std::size_t count, std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t bs = fmt.block_samples();
    std::vector<double> out;
    out.reserve(count);
    if (s.wf == Waveform::Scfde) {
        // One settling block on each side keeps every measured window in steady state.
        const std::size_t ns = waveform::scfde_symbols_per_block(fmt, pulse.oversampling);
        const std::size_t total = count + 2;
        const CVec sym = mapping::map_bits(rng.bits(total * ns * s.con.bits_per_symbol()), s.con);
        const auto tx = waveform::scfde_modulate(sym, fmt, pulse, pulse.oversampling);
        for (std::size_t b = 1; b <= count; ++b) {
            const std::size_t start = tx.group_delay + b * bs;
            out.push_back(sigcore::papr_db(std::span<const cplx>(tx.signal.samples().data() + start, bs)));
        }
        return out;
    }
    const std::size_t na = static_cast<std::size_t>(fmt.n_alloc);
    const CVec sym = mapping::map_bits(rng.bits(count * na * s.con.bits_per_symbol()), s.con);
    const ComplexSignal x = s.wf == Waveform::Ofdm ? waveform::ofdm_modulate(sym, fmt) : waveform::dfts_ofdm_modulate(sym, fmt);
    for (std::size_t b = 0; b < count; ++b)
        out.push_back(sigcore::papr_db(std::span<const cplx>(x.samples().data() + b * bs, bs)));
    return out;
}

void run_papr(const ExperimentConfig& cfg, Outputs& out) {
    const auto& ps = cfg.papr;
    waveform::BlockFormat fmt = cfg.link.block;
    fmt.oversampling = ps.oversampling;
    const sigcore::FilterSpec base = sigcore::FilterSpec::rrc(ps.roll_off, ps.span_symbols, ps.scfde_oversampling);

    std::vector<PaprSeries> series;
    for (const auto& label : ps.series) {
        const auto colon = label.find(':');
        const std::string wf = label.substr(0, colon);
        const bool opt = wf == "scfde_opt";
        series.push_back({label, opt ? Waveform::Scfde : waveform::parse_waveform(wf), opt,
                          mapping::constellation_by_name(label.substr(colon + 1))});
    }

    std::vector<double> thresholds;
    for (double t = 0.0; t <= ps.threshold_max_db + 1e-9; t += ps.threshold_step_db)
        thresholds.push_back(std::round(t * 1e9) / 1e9);

    Csv curve({"series", "papr_db", "ccdf"});
    Csv summary({"series", "blocks", "papr_at_1e-2_db", "papr_at_1e-3_db", "occupied_fraction"});
    Csv filt({"series", "tap_index", "tap"});
    Csv design({"series", "base_papr_db", "optimized_papr_db", "base_bandwidth", "optimized_bandwidth"});
    bool any_opt = false;

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        sigcore::FilterSpec pulse = base;
        if (s.optimized) {
            any_opt = true;
            sigcore::FilterDesignOptions o;
            o.iterations = ps.optimizer_iterations;
            sigcore::FilterDesignReport rep;
            pulse = stage("filter_design", [&] {
                return sigcore::optimize_tx_filter(base, s.con, ps.optimizer_train_blocks,
                                                   derive_seed(cfg.seed, {0xF17E4ULL, si}), o, &rep);
            });
            for (std::size_t i = 0; i < pulse.taps.size(); ++i) filt.row({s.label, num(i), num(pulse.taps[i])});
            design.row({s.label, num(rep.base_papr_db), num(rep.optimized_papr_db), num(rep.base_bandwidth),
                        num(rep.optimized_bandwidth)});
        }
        const std::size_t n_chunks = (ps.blocks + kPaprChunk - 1) / kPaprChunk;
        std::vector<std::vector<double>> parts(n_chunks);
        stage("papr_" + s.label, [&] {
            parallel_for(n_chunks, cfg.workers, [&](std::size_t c) {
                const std::size_t count = std::min(kPaprChunk, ps.blocks - c * kPaprChunk);
                parts[c] = papr_chunk(s, fmt, pulse, count, derive_seed(cfg.seed, {si, c}));
            });
            return 0;
        });
        std::vector<double> all;
        all.reserve(ps.blocks);
        for (const auto& p : parts) all.insert(all.end(), p.begin(), p.end());
        for (const auto& pt : sigcore::ccdf(all, thresholds)) curve.row({s.label, num(pt.threshold_db), num(pt.probability)});
        const double occ = s.wf == Waveform::Scfde
                               ? (s.optimized ? sigcore::occupied_bandwidth(pulse.taps, pulse.oversampling) : 1.0 + ps.roll_off) /
                                     pulse.oversampling * ps.oversampling
                               : waveform::occupied_fraction(fmt) * ps.oversampling;
        summary.row({s.label, num(all.size()), num(sigcore::papr_at_ccdf(all, 1e-2)), num(sigcore::papr_at_ccdf(all, 1e-3)),
                     num(occ)});
    }
    out.write_csv("papr_ccdf.csv", curve);
    out.write_csv("papr_summary.csv", summary);
    if (any_opt) {
        out.write_csv("tx_filter.csv", filt);
        out.write_csv("tx_filter_design.csv", design);
    }
}

// ---------------------------------------------------------------------------
// Link experiments
// ---------------------------------------------------------------------------

void run_bler(const ExperimentConfig& cfg, Outputs& out) {
    const auto recs = stage("link", [&] { return link::run_link(cfg.link); });
    Csv csv(kRecordColumns);
    for (const auto& r : recs) add_record_row(csv, {}, r);
    out.write_csv("bler.csv", csv);
    Csv sum({"target_bler", "snr_db"});
    sum.row({"0.1", opt_num(link::snr_at_target_bler(recs, 0.1))});
    out.write_csv("bler_summary.csv", sum);
}

void run_opbo(const ExperimentConfig& cfg, Outputs& out) {
    const std::vector<Waveform> wfs{Waveform::DftsOfdm, Waveform::Scfde};
    const auto& os = cfg.opbo;
    Csv raw(with_records({"waveform", "constellation", "opbo_db"}));
    std::vector<std::string> head{"opbo_db"};
    for (const auto& c : os.constellations)
        for (auto w : wfs) head.push_back(waveform::to_string(w) + "_" + c);
    Csv table(head);
    std::vector<std::vector<std::string>> rows(os.opbo_db.size());
    for (std::size_t oi = 0; oi < os.opbo_db.size(); ++oi) rows[oi].push_back(num(os.opbo_db[oi]));

    for (std::size_t ci = 0; ci < os.constellations.size(); ++ci)
        for (auto w : wfs)
            for (std::size_t oi = 0; oi < os.opbo_db.size(); ++oi) {
                link::LinkConfig lc = cfg.link;
                lc.waveform = w;
                lc.constellation = os.constellations[ci];
                lc.opbo_db = os.opbo_db[oi];
                // Both waveforms of a cell share the seed (common random numbers).
                lc.seed = derive_seed(cfg.seed, {ci, oi});
                const std::string label = waveform::to_string(w) + "/" + lc.constellation + "/opbo=" + num(lc.opbo_db);
                const auto recs = stage("link " + label, [&] { return link::run_link(lc); });
                for (const auto& r : recs) add_record_row(raw, {waveform::to_string(w), lc.constellation, num(lc.opbo_db)}, r);
                rows[oi].push_back(opt_num(link::snr_at_target_bler(recs, os.target_bler), 2));
            }
    for (auto& r : rows) table.row(std::move(r));
    out.write_csv("opbo_table.csv", table);
    out.write_csv("opbo_bler.csv", raw);
}

void run_pn(const ExperimentConfig& cfg, Outputs& out) {
    Csv raw(with_records({"waveform", "compensation"}));
    Csv sum({"waveform", "compensation", "snr_at_target_db"});
    for (std::size_t wi = 0; wi < cfg.pn.waveforms.size(); ++wi)
        for (bool comp : {true, false}) {
            link::LinkConfig lc = cfg.link;
            lc.waveform = waveform::parse_waveform(cfg.pn.waveforms[wi]);
            lc.pn_compensation = comp;
            lc.seed = derive_seed(cfg.seed, {wi});
            const std::string c = comp ? "on" : "off";
            const auto recs = stage("link " + cfg.pn.waveforms[wi] + "/compensation=" + c, [&] { return link::run_link(lc); });
            for (const auto& r : recs) add_record_row(raw, {cfg.pn.waveforms[wi], c}, r);
            sum.row({cfg.pn.waveforms[wi], c, opt_num(link::snr_at_target_bler(recs, cfg.pn.target_bler))});
        }
    out.write_csv("pn_bler.csv", raw);
    out.write_csv("pn_summary.csv", sum);
}

// ---------------------------------------------------------------------------
// ZXM
// ---------------------------------------------------------------------------

void run_zxm_rate(const ExperimentConfig& cfg, Outputs& out) {
    Csv csv({"ftn_factor", "min_run", "rate", "capacity", "block_symbols", "payload_bits", "block_rate"});
    for (int m : cfg.zxm.rate_ftn)
        for (int r : cfg.zxm.rate_min_run) {
            zxm::RunlengthSpec s{r, cfg.zxm.spec.block_symbols, m};
            const int k = stage("runlength", [&] { return zxm::rl_payload_bits(s); });
            csv.row({std::to_string(m), std::to_string(r), num(zxm::zxm_rate(s)), num(zxm::rl_capacity(r)),
                     std::to_string(s.block_symbols), std::to_string(k),
                     num(static_cast<double>(k) * m / s.block_symbols)});
        }
    out.write_csv("zxm_rate.csv", csv);
}

void run_zxm_ber(const ExperimentConfig& cfg, Outputs& out) {
    const auto& z = cfg.zxm;
    const auto pulse = sigcore::FilterSpec::rrc(z.roll_off, z.span_symbols, z.oversampling);
    const int k = zxm::rl_payload_bits(z.spec);
    struct Outcome {
        std::size_t bit_errors = 0;
        bool block_error = false;
    };
    Csv csv({"snr_db", "blocks", "bits", "bit_errors", "ber", "block_errors", "bler"});
    for (std::size_t si = 0; si < z.snr_db.size(); ++si) {
        std::vector<Outcome> res(z.blocks);
        stage("zxm_ber", [&] {
            parallel_for(z.blocks, cfg.workers, [&](std::size_t b) {
                Rng rng(derive_seed(cfg.seed, {si, b}));
                const Bits bits = rng.bits(static_cast<std::size_t>(k));
                const auto frame = zxm::zxm_construct(bits, z.spec, pulse);
                // Real-rail noise referenced to the block's mean power.
                const double sigma = std::sqrt(frame.signal.mean_power() / std::pow(10.0, z.snr_db[si] / 10.0));
                CVec q(frame.signal.size());
                for (std::size_t i = 0; i < q.size(); ++i)
                    q[i] = frame.signal[i].real() + sigma * rng.normal() > 0.0 ? 1.0 : -1.0;
                zxm::DetectorOptions o;
                o.noise_std = sigma;
                o.memory_symbols = z.memory_symbols;
                const Bits dec = zxm::zxm_detect(ComplexSignal(std::move(q), frame.signal.sample_rate_hz()), z.spec, pulse,
                                                 z.rx_oversample, o);
                Outcome oc;
                for (std::size_t i = 0; i < dec.size(); ++i) oc.bit_errors += dec[i] != bits[i];
                oc.block_error = oc.bit_errors > 0;
                res[b] = oc;
            });
            return 0;
        });
        std::size_t be = 0, blk = 0;
        for (const auto& r : res) {
            be += r.bit_errors;
            blk += r.block_error;
        }
        const std::size_t bits = z.blocks * static_cast<std::size_t>(k);
        csv.row({num(z.snr_db[si]), num(z.blocks), num(bits), num(be), num(static_cast<double>(be) / bits), num(blk),
                 num(static_cast<double>(blk) / z.blocks)});
    }
    out.write_csv("zxm_ber.csv", csv);
}

// ---------------------------------------------------------------------------
// Planner and spectrum
// ---------------------------------------------------------------------------

void run_latency(const ExperimentConfig& cfg, Outputs& out) {
    out.write("latency.csv", stage("latency", [&] { return latency_csv(cfg.latency, out.trailer()); }));
    Csv csv({"n_retx", "budget_us", "alpha_max", "tx_proc_us", "rx_proc_us"});
    for (int n : cfg.latency.retx) {
        planner::LatencyScenario s = cfg.latency.scenario;
        s.n_retx = n;
        const auto iv = planner::alpha_interval(s, cfg.latency.budget_us);
        if (!iv) {
            csv.row({std::to_string(n), num(cfg.latency.budget_us), "NA", "NA", "NA"});
            continue;
        }
        csv.row({std::to_string(n), num(cfg.latency.budget_us), num(iv->second),
                 num(planner::proc_time(iv->second, planner::Side::Tx, s.proc_base_tx_us, s.proc_base_rx_us)),
                 num(planner::proc_time(iv->second, planner::Side::Rx, s.proc_base_tx_us, s.proc_base_rx_us))});
    }
    out.write_csv("latency_budget.csv", csv);
}

void run_psd(const ExperimentConfig& cfg, Outputs& out) {
    const auto& p = cfg.psd;
    waveform::BlockFormat fmt = cfg.link.block;
    fmt.oversampling = 1;
    const double fs = fmt.sample_rate_hz();
    const Waveform wf = waveform::parse_waveform(p.waveform);
    const auto con = mapping::constellation_by_name(cfg.link.constellation);
    std::vector<waveform::Channel> chans;
    Csv layout({"channel", "center_offset_hz", "sample_rate_hz"});
    for (int c = 0; c < p.channels; ++c) {
        Rng rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(c)}));
        ComplexSignal sig = stage("channel_waveform", [&]() -> ComplexSignal {
            if (wf == Waveform::Scfde) {
                const std::size_t ns = waveform::scfde_symbols_per_block(fmt, cfg.link.pulse.oversampling);
                const CVec sym = mapping::map_bits(rng.bits(p.blocks * ns * con.bits_per_symbol()), con);
                return waveform::scfde_modulate(sym, fmt, cfg.link.pulse, cfg.link.pulse.oversampling).signal;
            }
            const CVec sym =
                mapping::map_bits(rng.bits(p.blocks * static_cast<std::size_t>(fmt.n_alloc) * con.bits_per_symbol()), con);
            return wf == Waveform::Ofdm ? waveform::ofdm_modulate(sym, fmt) : waveform::dfts_ofdm_modulate(sym, fmt);
        });
        const double offset = (c - (p.channels - 1) / 2.0) * p.spacing * fs;
        layout.row({std::to_string(c), num(offset), num(fs)});
        chans.push_back({std::move(sig), offset});
    }
    const ComplexSignal comp = stage("compose", [&] { return waveform::multicarrier_compose(chans, fs * p.composite_factor); });
    const auto psd = stage("psd", [&] { return sigcore::psd_estimate(comp, p.segment); });
    Csv csv({"freq_hz", "psd_db_per_hz"});
    for (const auto& b : psd) csv.row({num(b.freq_hz), num(10.0 * std::log10(std::max(b.density, 1e-300)))});
    out.write_csv("multicarrier_psd.csv", csv);
    out.write_csv("multicarrier_layout.csv", layout);
}

}  // namespace

std::string numerology_csv(const std::vector<double>& scs_khz, const std::string& trailer) {
    Csv csv({"scs_khz", "ts_ns", "t_block_us", "t_slot2_us", "t_slot14_us", "bw_ghz"});
    for (double s : scs_khz) {
        planner::Numerology n;
        n.scs_hz = s * 1e3;
        const auto r = planner::numerology_derive(n);
        csv.row({num(r.scs_khz), num(r.ts_ns), num(r.t_block_us), num(r.t_slot2_us), num(r.t_slot14_us), num(r.bw_ghz)});
    }
    return csv.text(trailer);
}

std::string latency_csv(const LatencySettings& s, const std::string& trailer) {
    Csv csv({"alpha", "n_retx", "latency_us", "proc_fraction"});
    for (const auto& p : planner::latency_sweep(s.scenario, s.alphas, s.retx))
        csv.row({num(p.alpha), std::to_string(p.n_retx), num(p.latency_us), num(p.proc_fraction)});
    return csv.text(trailer);
}

std::string ResultManifest::to_json() const {
    nlohmann::ordered_json j;
    j["tool"] = "subthz";
    j["tool_version"] = tool_version;
    j["experiment"] = experiment;
    j["config_sha256"] = config_digest;
    j["seed"] = seed;
    j["workers"] = workers;
    j["wall_clock_s"] = wall_clock_s;
    j["files"] = nlohmann::ordered_json::array();
    for (const auto& f : files) j["files"].push_back({{"name", f.name}, {"sha256", f.sha256}, {"bytes", f.bytes}});
    return j.dump(2) + "\n";
}

ResultManifest run_experiment(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    ResultManifest m;
    m.experiment = to_string(cfg.kind);
    m.config_digest = config_digest(cfg);
    m.seed = cfg.seed;
    m.workers = cfg.workers;

    const fs::path dir(cfg.output);
    stage("output", [&] {
        fs::create_directories(dir);
        return 0;
    });
    // Worker count is left out so that CSVs match across parallel decompositions.
    Outputs out(dir, "# manifest=manifest.json config_sha256=" + m.config_digest + " seed=" + std::to_string(cfg.seed) +
                         " version=" + kToolVersion);
    try {
        using K = ExperimentKind;
        switch (cfg.kind) {
            case K::PaprCcdf: run_papr(cfg, out); break;
            case K::BlerSweep: run_bler(cfg, out); break;
            case K::OpboTable: run_opbo(cfg, out); break;
            case K::PnComparison: run_pn(cfg, out); break;
            case K::ZxmRate: run_zxm_rate(cfg, out); break;
            case K::ZxmBer: run_zxm_ber(cfg, out); break;
            case K::LatencySweep: run_latency(cfg, out); break;
            case K::Numerology:
                out.write("numerology.csv", numerology_csv(cfg.numerology.scs_khz, out.trailer()));
                break;
            case K::MulticarrierPsd: run_psd(cfg, out); break;
        }
        out.write("config.txt", serialize(cfg));
        m.files = out.files();
        m.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.write("manifest.json", m.to_json());
    } catch (const RunError&) {
        out.remove_all();
        throw;
    } catch (const std::exception& e) {
        out.remove_all();
        throw RunError("write", e.what());
    }
    return m;
}

}  // namespace subthz::harness
