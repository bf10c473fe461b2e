#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "subthz/harness.hpp"

namespace subthz::harness {

namespace {

const std::vector<std::pair<ExperimentKind, std::string>>& kind_names() {
    static const std::vector<std::pair<ExperimentKind, std::string>> names{
        {ExperimentKind::PaprCcdf, "papr_ccdf"},       {ExperimentKind::BlerSweep, "bler_sweep"},
        {ExperimentKind::OpboTable, "opbo_table"},     {ExperimentKind::PnComparison, "pn_comparison"},
        {ExperimentKind::ZxmRate, "zxm_rate"},         {ExperimentKind::ZxmBer, "zxm_ber"},
        {ExperimentKind::LatencySweep, "latency_sweep"}, {ExperimentKind::Numerology, "numerology"},
        {ExperimentKind::MulticarrierPsd, "multicarrier_psd"},
    };
    return names;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(trim(cur));
    return out;
}

double to_double(const std::string& s) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    const auto [p, ec] = std::from_chars(s.data(), end, v);
    if (s.empty() || ec != std::errc{} || p != end || !std::isfinite(v))
        throw InvalidArgument("expected a number, got '" + s + "'");
    return v;
}

long long to_int(const std::string& s) {
    long long v = 0;
    const auto* end = s.data() + s.size();
    const auto [p, ec] = std::from_chars(s.data(), end, v);
    if (s.empty() || ec != std::errc{} || p != end) throw InvalidArgument("expected an integer, got '" + s + "'");
    return v;
}

int int_in(const std::string& s, long long lo, long long hi) {
    const long long v = to_int(s);
    if (v < lo || v > hi)
        throw InvalidArgument("value " + s + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return static_cast<int>(v);
}

std::size_t count_of(const std::string& s) {
    const long long v = to_int(s);
    if (v < 1) throw InvalidArgument("expected a positive count, got '" + s + "'");
    return static_cast<std::size_t>(v);
}

double real_in(const std::string& s, double lo, double hi) {
    const double v = to_double(s);
    if (v < lo || v > hi)
        throw InvalidArgument("value " + s + " outside [" + format_double(lo) + ", " + format_double(hi) + "]");
    return v;
}

double positive(const std::string& s) {
    const double v = to_double(s);
    if (v <= 0.0) throw InvalidArgument("expected a positive number, got '" + s + "'");
    return v;
}

bool to_bool(const std::string& s) {
    if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
    if (s == "false" || s == "no" || s == "off" || s == "0") return false;
    throw InvalidArgument("expected true or false, got '" + s + "'");
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

template <class T, class F>
std::string join(const std::vector<T>& v, F&& fmt) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += fmt(v[i]);
    }
    return out;
}

std::string join_doubles(const std::vector<double>& v) { return join(v, [](double x) { return format_double(x); }); }
std::string join_ints(const std::vector<int>& v) { return join(v, [](int x) { return std::to_string(x); }); }
std::string join_strings(const std::vector<std::string>& v) { return join(v, [](const std::string& x) { return x; }); }

std::vector<std::string> nonempty_list(const std::string& s) {
    auto v = split(s, ',');
    for (const auto& x : v)
        if (x.empty()) throw InvalidArgument("empty list element in '" + s + "'");
    return v;
}

std::vector<int> int_list(const std::string& s, long long lo, long long hi) {
    std::vector<int> out;
    for (const auto& x : nonempty_list(s)) out.push_back(int_in(x, lo, hi));
    return out;
}

std::string format_cplx(cplx z) {
    if (z.imag() == 0.0) return format_double(z.real());
    return format_double(z.real()) + ":" + format_double(z.imag());
}

cplx parse_cplx(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) return {to_double(s), 0.0};
    return {to_double(trim(s.substr(0, colon))), to_double(trim(s.substr(colon + 1)))};
}

// Optional sub-models are edited through this draft and folded into the
// LinkConfig once every line has been read.
struct Draft {
    ExperimentConfig cfg;
    bool pa_on = false;
    impair::PaModel pa{};
    double opbo_db = 6.0;
    bool pn_on = false;
    double pn_carrier_hz = 140e9;
    std::vector<std::pair<double, double>> pn_breakpoints = impair::default_pn_spec().breakpoints;
    std::optional<double> pn_floor;
    bool q_on = false;
    impair::QuantizerSpec q{};
    bool kind_seen = false;
};

Draft draft_of(const ExperimentConfig& c) {
    Draft d;
    d.cfg = c;
    d.kind_seen = true;
    if (c.link.pa) {
        d.pa_on = true;
        d.pa = *c.link.pa;
    }
    d.opbo_db = c.link.opbo_db;
    if (c.link.pn) {
        d.pn_on = true;
        d.pn_carrier_hz = c.link.pn->carrier_hz;
        d.pn_breakpoints = c.link.pn->breakpoints;
        d.pn_floor = c.link.pn->floor_dbc_hz;
    } else {
        d.pn_floor = impair::default_pn_spec(d.pn_carrier_hz).floor_dbc_hz;
    }
    if (c.link.quantizer) {
        d.q_on = true;
        d.q = *c.link.quantizer;
    }
    return d;
}

struct Key {
    std::string name;
    std::function<std::string(const Draft&)> get;
    std::function<void(Draft&, const std::string&)> set;
};

const std::vector<Key>& registry() {
    using W = waveform::Waveform;
    static const std::vector<Key> keys{
        {"experiment", [](const Draft& d) { return to_string(d.cfg.kind); },
         [](Draft& d, const std::string& v) {
             d.cfg.kind = parse_kind(v);
             d.kind_seen = true;
         }},
        {"output", [](const Draft& d) { return d.cfg.output; },
         [](Draft& d, const std::string& v) {
             require(!v.empty(), "output directory must be nonempty");
             d.cfg.output = v;
         }},
        {"seed", [](const Draft& d) { return std::to_string(d.cfg.seed); },
         [](Draft& d, const std::string& v) {
             const long long s = to_int(v);
             require(s >= 0, "seed must be non-negative");
             d.cfg.seed = static_cast<std::uint64_t>(s);
         }},
        {"workers", [](const Draft& d) { return std::to_string(d.cfg.workers); },
         [](Draft& d, const std::string& v) { d.cfg.workers = int_in(v, 1, 1024); }},

        // Link
        {"link.waveform", [](const Draft& d) { return waveform::to_string(d.cfg.link.waveform); },
         [](Draft& d, const std::string& v) { d.cfg.link.waveform = waveform::parse_waveform(v); }},
        {"link.constellation", [](const Draft& d) { return d.cfg.link.constellation; },
         [](Draft& d, const std::string& v) {
             mapping::constellation_by_name(v);
             d.cfg.link.constellation = v;
         }},
        {"link.code.rate", [](const Draft& d) { return coding::to_string(d.cfg.link.code.rate); },
         [](Draft& d, const std::string& v) { d.cfg.link.code.rate = coding::parse_code_rate(v); }},
        {"link.block.n_fft", [](const Draft& d) { return std::to_string(d.cfg.link.block.n_fft); },
         [](Draft& d, const std::string& v) { d.cfg.link.block.n_fft = int_in(v, 2, 1 << 20); }},
        {"link.block.n_cp", [](const Draft& d) { return std::to_string(d.cfg.link.block.n_cp); },
         [](Draft& d, const std::string& v) { d.cfg.link.block.n_cp = int_in(v, 0, 1 << 20); }},
        {"link.block.n_alloc", [](const Draft& d) { return std::to_string(d.cfg.link.block.n_alloc); },
         [](Draft& d, const std::string& v) { d.cfg.link.block.n_alloc = int_in(v, 1, 1 << 20); }},
        {"link.block.mapping", [](const Draft& d) { return waveform::to_string(d.cfg.link.block.mapping); },
         [](Draft& d, const std::string& v) { d.cfg.link.block.mapping = waveform::parse_mapping(v); }},
        {"link.block.oversampling", [](const Draft& d) { return std::to_string(d.cfg.link.block.oversampling); },
         [](Draft& d, const std::string& v) { d.cfg.link.block.oversampling = int_in(v, 1, 64); }},
        {"link.block.scs_khz", [](const Draft& d) { return format_double(d.cfg.link.block.scs_hz / 1e3); },
         [](Draft& d, const std::string& v) { d.cfg.link.block.scs_hz = positive(v) * 1e3; }},
        {"link.pulse.roll_off", [](const Draft& d) { return format_double(d.cfg.link.pulse.roll_off); },
         [](Draft& d, const std::string& v) { d.cfg.link.pulse.roll_off = real_in(v, 0.0, 1.0); }},
        {"link.pulse.span", [](const Draft& d) { return std::to_string(d.cfg.link.pulse.span_symbols); },
         [](Draft& d, const std::string& v) { d.cfg.link.pulse.span_symbols = int_in(v, 1, 256); }},
        {"link.pulse.oversampling", [](const Draft& d) { return std::to_string(d.cfg.link.pulse.oversampling); },
         [](Draft& d, const std::string& v) { d.cfg.link.pulse.oversampling = int_in(v, 1, 64); }},
        {"link.cpm.h",
         [](const Draft& d) { return std::to_string(d.cfg.link.cpm.h_num) + "/" + std::to_string(d.cfg.link.cpm.h_den); },
         [](Draft& d, const std::string& v) {
             const auto parts = split(v, '/');
             require(parts.size() == 2, "modulation index must be written as num/den");
             d.cfg.link.cpm.h_num = int_in(parts[0], 1, 64);
             d.cfg.link.cpm.h_den = int_in(parts[1], 1, 64);
         }},
        {"link.cpm.samples_per_symbol", [](const Draft& d) { return std::to_string(d.cfg.link.cpm.samples_per_symbol); },
         [](Draft& d, const std::string& v) { d.cfg.link.cpm.samples_per_symbol = int_in(v, 1, 64); }},
        {"link.cpm.subsample", [](const Draft& d) { return std::to_string(d.cfg.link.cpm.subsample_factor); },
         [](Draft& d, const std::string& v) { d.cfg.link.cpm.subsample_factor = int_in(v, 1, 64); }},
        {"link.equalizer", [](const Draft& d) { return rxchain::to_string(d.cfg.link.equalizer); },
         [](Draft& d, const std::string& v) { d.cfg.link.equalizer = rxchain::parse_equalizer(v); }},

        {"link.pa.enabled", [](const Draft& d) { return bool_str(d.pa_on); },
         [](Draft& d, const std::string& v) { d.pa_on = to_bool(v); }},
        {"link.pa.gain_db", [](const Draft& d) { return format_double(20.0 * std::log10(d.pa.gain)); },
         [](Draft& d, const std::string& v) { d.pa.gain = std::pow(10.0, real_in(v, -100.0, 100.0) / 20.0); }},
        {"link.pa.a_sat", [](const Draft& d) { return format_double(d.pa.a_sat); },
         [](Draft& d, const std::string& v) { d.pa.a_sat = positive(v); }},
        {"link.pa.smoothness", [](const Draft& d) { return format_double(d.pa.smoothness); },
         [](Draft& d, const std::string& v) { d.pa.smoothness = positive(v); }},
        {"link.pa.am_pm", [](const Draft& d) { return bool_str(d.pa.am_pm.has_value()); },
         [](Draft& d, const std::string& v) {
             if (!to_bool(v)) d.pa.am_pm.reset();
             else if (!d.pa.am_pm) d.pa.am_pm = impair::AmPm{};
         }},
        {"link.pa.am_pm_alpha", [](const Draft& d) { return format_double(d.pa.am_pm.value_or(impair::AmPm{}).alpha); },
         [](Draft& d, const std::string& v) {
             const double a = to_double(v);
             if (d.pa.am_pm) d.pa.am_pm->alpha = a;
         }},
        {"link.pa.am_pm_beta", [](const Draft& d) { return format_double(d.pa.am_pm.value_or(impair::AmPm{}).beta); },
         [](Draft& d, const std::string& v) {
             const double b = positive(v);
             if (d.pa.am_pm) d.pa.am_pm->beta = b;
         }},
        {"link.pa.am_pm_q", [](const Draft& d) { return format_double(d.pa.am_pm.value_or(impair::AmPm{}).q); },
         [](Draft& d, const std::string& v) {
             const double q = positive(v);
             if (d.pa.am_pm) d.pa.am_pm->q = q;
         }},
        {"link.opbo_db", [](const Draft& d) { return format_double(d.opbo_db); },
         [](Draft& d, const std::string& v) { d.opbo_db = real_in(v, 0.0, 60.0); }},

        {"link.pn.enabled", [](const Draft& d) { return bool_str(d.pn_on); },
         [](Draft& d, const std::string& v) { d.pn_on = to_bool(v); }},
        {"link.pn.carrier_ghz", [](const Draft& d) { return format_double(d.pn_carrier_hz / 1e9); },
         [](Draft& d, const std::string& v) { d.pn_carrier_hz = positive(v) * 1e9; }},
        {"link.pn.breakpoints",
         [](const Draft& d) {
             return join(d.pn_breakpoints, [](const std::pair<double, double>& b) {
                 return format_double(b.first) + ":" + format_double(b.second);
             });
         },
         [](Draft& d, const std::string& v) {
             std::vector<std::pair<double, double>> bps;
             if (v != "none") {
                 for (const auto& item : nonempty_list(v)) {
                     const auto parts = split(item, ':');
                     require(parts.size() == 2, "breakpoints are written offset_hz:dbc_hz, got '" + item + "'");
                     bps.emplace_back(positive(parts[0]), to_double(parts[1]));
                 }
             }
             d.pn_breakpoints = std::move(bps);
         }},
        {"link.pn.floor_dbc_hz",
         [](const Draft& d) {
             return format_double(d.pn_floor ? *d.pn_floor : impair::default_pn_spec(d.pn_carrier_hz).floor_dbc_hz);
         },
         [](Draft& d, const std::string& v) {
             if (v == "auto") d.pn_floor.reset();
             else d.pn_floor = to_double(v);
         }},
        {"link.pn.compensation", [](const Draft& d) { return bool_str(d.cfg.link.pn_compensation); },
         [](Draft& d, const std::string& v) { d.cfg.link.pn_compensation = to_bool(v); }},
        {"link.pilots", [](const Draft& d) { return std::to_string(d.cfg.link.pilots_per_block); },
         [](Draft& d, const std::string& v) { d.cfg.link.pilots_per_block = int_in(v, 1, 1 << 20); }},

        {"link.quantizer.enabled", [](const Draft& d) { return bool_str(d.q_on); },
         [](Draft& d, const std::string& v) { d.q_on = to_bool(v); }},
        {"link.quantizer.bits", [](const Draft& d) { return std::to_string(d.q.bits); },
         [](Draft& d, const std::string& v) { d.q.bits = int_in(v, 1, 24); }},
        {"link.quantizer.full_scale",
         [](const Draft& d) { return d.q.full_scale ? format_double(*d.q.full_scale) : std::string("auto"); },
         [](Draft& d, const std::string& v) {
             if (v == "auto") d.q.full_scale.reset();
             else d.q.full_scale = positive(v);
         }},
        {"link.quantizer.clip_probability", [](const Draft& d) { return format_double(d.q.clip_probability); },
         [](Draft& d, const std::string& v) { d.q.clip_probability = real_in(v, 0.0, 0.5); }},

        {"link.channel.taps", [](const Draft& d) { return join(d.cfg.link.channel_taps, format_cplx); },
         [](Draft& d, const std::string& v) {
             CVec taps;
             for (const auto& t : nonempty_list(v)) taps.push_back(parse_cplx(t));
             d.cfg.link.channel_taps = std::move(taps);
         }},
        {"link.snr_db", [](const Draft& d) { return join_doubles(d.cfg.link.snr_grid_db); },
         [](Draft& d, const std::string& v) { d.cfg.link.snr_grid_db = parse_range(v); }},
        {"link.blocks_min", [](const Draft& d) { return std::to_string(d.cfg.link.n_blocks_min); },
         [](Draft& d, const std::string& v) { d.cfg.link.n_blocks_min = count_of(v); }},
        {"link.block_errors_min", [](const Draft& d) { return std::to_string(d.cfg.link.n_block_errors_min); },
         [](Draft& d, const std::string& v) { d.cfg.link.n_block_errors_min = count_of(v); }},
        {"link.batch_blocks", [](const Draft& d) { return std::to_string(d.cfg.link.batch_blocks); },
         [](Draft& d, const std::string& v) { d.cfg.link.batch_blocks = static_cast<std::size_t>(int_in(v, 0, 1 << 20)); }},
        {"link.stop_bler",
         [](const Draft& d) { return d.cfg.link.stop_bler ? format_double(*d.cfg.link.stop_bler) : std::string("none"); },
         [](Draft& d, const std::string& v) {
             if (v == "none") d.cfg.link.stop_bler.reset();
             else d.cfg.link.stop_bler = real_in(v, 0.0, 0.999999);
         }},

        // PAPR
        {"papr.blocks", [](const Draft& d) { return std::to_string(d.cfg.papr.blocks); },
         [](Draft& d, const std::string& v) { d.cfg.papr.blocks = count_of(v); }},
        {"papr.series", [](const Draft& d) { return join_strings(d.cfg.papr.series); },
         [](Draft& d, const std::string& v) {
             auto list = nonempty_list(v);
             for (const auto& s : list) {
                 const auto parts = split(s, ':');
                 require(parts.size() == 2, "series are written waveform:constellation, got '" + s + "'");
                 if (parts[0] != "scfde_opt") {
                     const W w = waveform::parse_waveform(parts[0]);
                     require(w != W::CpmDftsOfdm, "CPM is not a PAPR series");
                 }
                 mapping::constellation_by_name(parts[1]);
             }
             d.cfg.papr.series = std::move(list);
         }},
        {"papr.oversampling", [](const Draft& d) { return std::to_string(d.cfg.papr.oversampling); },
         [](Draft& d, const std::string& v) { d.cfg.papr.oversampling = int_in(v, 1, 16); }},
        {"papr.scfde_oversampling", [](const Draft& d) { return std::to_string(d.cfg.papr.scfde_oversampling); },
         [](Draft& d, const std::string& v) { d.cfg.papr.scfde_oversampling = int_in(v, 1, 64); }},
        {"papr.roll_off", [](const Draft& d) { return format_double(d.cfg.papr.roll_off); },
         [](Draft& d, const std::string& v) { d.cfg.papr.roll_off = real_in(v, 0.0, 1.0); }},
        {"papr.span", [](const Draft& d) { return std::to_string(d.cfg.papr.span_symbols); },
         [](Draft& d, const std::string& v) { d.cfg.papr.span_symbols = int_in(v, 1, 256); }},
        {"papr.threshold_step_db", [](const Draft& d) { return format_double(d.cfg.papr.threshold_step_db); },
         [](Draft& d, const std::string& v) { d.cfg.papr.threshold_step_db = real_in(v, 1e-3, 5.0); }},
        {"papr.threshold_max_db", [](const Draft& d) { return format_double(d.cfg.papr.threshold_max_db); },
         [](Draft& d, const std::string& v) { d.cfg.papr.threshold_max_db = real_in(v, 0.1, 40.0); }},
        {"papr.optimizer_iterations", [](const Draft& d) { return std::to_string(d.cfg.papr.optimizer_iterations); },
         [](Draft& d, const std::string& v) { d.cfg.papr.optimizer_iterations = int_in(v, 1, 100000); }},
        {"papr.optimizer_train_blocks", [](const Draft& d) { return std::to_string(d.cfg.papr.optimizer_train_blocks); },
         [](Draft& d, const std::string& v) { d.cfg.papr.optimizer_train_blocks = int_in(v, 10, 1000000); }},

        // OPBO table
        {"opbo.grid_db", [](const Draft& d) { return join_doubles(d.cfg.opbo.opbo_db); },
         [](Draft& d, const std::string& v) {
             auto g = parse_range(v);
             for (double x : g) require(x >= 0.0, "OPBO values must be >= 0 dB");
             d.cfg.opbo.opbo_db = std::move(g);
         }},
        {"opbo.constellations", [](const Draft& d) { return join_strings(d.cfg.opbo.constellations); },
         [](Draft& d, const std::string& v) {
             auto list = nonempty_list(v);
             for (const auto& c : list) mapping::constellation_by_name(c);
             d.cfg.opbo.constellations = std::move(list);
         }},
        {"opbo.target_bler", [](const Draft& d) { return format_double(d.cfg.opbo.target_bler); },
         [](Draft& d, const std::string& v) { d.cfg.opbo.target_bler = real_in(v, 1e-9, 0.999999); }},

        // Phase-noise comparison
        {"pn.waveforms", [](const Draft& d) { return join_strings(d.cfg.pn.waveforms); },
         [](Draft& d, const std::string& v) {
             auto list = nonempty_list(v);
             for (const auto& w : list) waveform::parse_waveform(w);
             d.cfg.pn.waveforms = std::move(list);
         }},
        {"pn.target_bler", [](const Draft& d) { return format_double(d.cfg.pn.target_bler); },
         [](Draft& d, const std::string& v) { d.cfg.pn.target_bler = real_in(v, 1e-9, 0.999999); }},

        // ZXM
        {"zxm.min_run", [](const Draft& d) { return std::to_string(d.cfg.zxm.spec.min_run); },
         [](Draft& d, const std::string& v) { d.cfg.zxm.spec.min_run = int_in(v, 1, 64); }},
        {"zxm.block_symbols", [](const Draft& d) { return std::to_string(d.cfg.zxm.spec.block_symbols); },
         [](Draft& d, const std::string& v) { d.cfg.zxm.spec.block_symbols = int_in(v, 1, 4096); }},
        {"zxm.ftn_factor", [](const Draft& d) { return std::to_string(d.cfg.zxm.spec.ftn_factor); },
         [](Draft& d, const std::string& v) { d.cfg.zxm.spec.ftn_factor = int_in(v, 1, 64); }},
        {"zxm.roll_off", [](const Draft& d) { return format_double(d.cfg.zxm.roll_off); },
         [](Draft& d, const std::string& v) { d.cfg.zxm.roll_off = real_in(v, 0.0, 1.0); }},
        {"zxm.span", [](const Draft& d) { return std::to_string(d.cfg.zxm.span_symbols); },
         [](Draft& d, const std::string& v) { d.cfg.zxm.span_symbols = int_in(v, 1, 256); }},
        {"zxm.oversampling", [](const Draft& d) { return std::to_string(d.cfg.zxm.oversampling); },
         [](Draft& d, const std::string& v) { d.cfg.zxm.oversampling = int_in(v, 1, 256); }},
        {"zxm.rx_oversample", [](const Draft& d) { return std::to_string(d.cfg.zxm.rx_oversample); },
         [](Draft& d, const std::string& v) { d.cfg.zxm.rx_oversample = int_in(v, 1, 256); }},
        {"zxm.memory", [](const Draft& d) { return std::to_string(d.cfg.zxm.memory_symbols); },
         [](Draft& d, const std::string& v) { d.cfg.zxm.memory_symbols = int_in(v, 1, 20); }},
        {"zxm.snr_db", [](const Draft& d) { return join_doubles(d.cfg.zxm.snr_db); },
         [](Draft& d, const std::string& v) { d.cfg.zxm.snr_db = parse_range(v); }},
        {"zxm.blocks", [](const Draft& d) { return std::to_string(d.cfg.zxm.blocks); },
         [](Draft& d, const std::string& v) { d.cfg.zxm.blocks = count_of(v); }},
        {"zxm.rate_ftn", [](const Draft& d) { return join_ints(d.cfg.zxm.rate_ftn); },
         [](Draft& d, const std::string& v) { d.cfg.zxm.rate_ftn = int_list(v, 1, 64); }},
        {"zxm.rate_min_run", [](const Draft& d) { return join_ints(d.cfg.zxm.rate_min_run); },
         [](Draft& d, const std::string& v) { d.cfg.zxm.rate_min_run = int_list(v, 1, 64); }},

        // Latency
        {"latency.scs_khz", [](const Draft& d) { return format_double(d.cfg.latency.scenario.numerology.scs_hz / 1e3); },
         [](Draft& d, const std::string& v) { d.cfg.latency.scenario.numerology.scs_hz = positive(v) * 1e3; }},
        {"latency.n_blocks", [](const Draft& d) { return std::to_string(d.cfg.latency.scenario.n_blocks); },
         [](Draft& d, const std::string& v) { d.cfg.latency.scenario.n_blocks = int_in(v, 1, 1024); }},
        {"latency.alpha", [](const Draft& d) { return format_double(d.cfg.latency.scenario.alpha); },
         [](Draft& d, const std::string& v) { d.cfg.latency.scenario.alpha = real_in(v, 0.0, 1.0); }},
        {"latency.n_retx", [](const Draft& d) { return std::to_string(d.cfg.latency.scenario.n_retx); },
         [](Draft& d, const std::string& v) { d.cfg.latency.scenario.n_retx = int_in(v, 0, 1000); }},
        {"latency.proc_base_tx_us", [](const Draft& d) { return format_double(d.cfg.latency.scenario.proc_base_tx_us); },
         [](Draft& d, const std::string& v) { d.cfg.latency.scenario.proc_base_tx_us = real_in(v, 0.0, 1e9); }},
        {"latency.proc_base_rx_us", [](const Draft& d) { return format_double(d.cfg.latency.scenario.proc_base_rx_us); },
         [](Draft& d, const std::string& v) { d.cfg.latency.scenario.proc_base_rx_us = real_in(v, 0.0, 1e9); }},
        {"latency.alignment_us",
         [](const Draft& d) {
             const auto& a = d.cfg.latency.scenario.alignment_us;
             return a ? format_double(*a) : std::string("auto");
         },
         [](Draft& d, const std::string& v) {
             if (v == "auto") d.cfg.latency.scenario.alignment_us.reset();
             else d.cfg.latency.scenario.alignment_us = real_in(v, 0.0, 1e9);
         }},
        {"latency.alpha_sweep",
         [](const Draft& d) { return join_doubles(d.cfg.latency.alphas); },
         [](Draft& d, const std::string& v) {
             auto a = parse_range(v);
             for (double x : a) require(x >= 0.0 && x <= 1.0, "alpha values must lie in [0, 1]");
             d.cfg.latency.alphas = std::move(a);
         }},
        {"latency.retx", [](const Draft& d) { return join_ints(d.cfg.latency.retx); },
         [](Draft& d, const std::string& v) { d.cfg.latency.retx = int_list(v, 0, 1000); }},
        {"latency.budget_us", [](const Draft& d) { return format_double(d.cfg.latency.budget_us); },
         [](Draft& d, const std::string& v) { d.cfg.latency.budget_us = positive(v); }},

        // Numerology
        {"numerology.scs_khz", [](const Draft& d) { return join_doubles(d.cfg.numerology.scs_khz); },
         [](Draft& d, const std::string& v) {
             auto s = parse_range(v);
             for (double x : s) require(x > 0.0, "subcarrier spacings must be positive");
             d.cfg.numerology.scs_khz = std::move(s);
         }},

        // Multicarrier PSD
        {"psd.channels", [](const Draft& d) { return std::to_string(d.cfg.psd.channels); },
         [](Draft& d, const std::string& v) { d.cfg.psd.channels = int_in(v, 1, 64); }},
        {"psd.waveform", [](const Draft& d) { return d.cfg.psd.waveform; },
         [](Draft& d, const std::string& v) {
             const W w = waveform::parse_waveform(v);
             require(w == W::Scfde || w == W::DftsOfdm || w == W::Ofdm, "PSD channels must be scfde, dfts_ofdm or ofdm");
             d.cfg.psd.waveform = v;
         }},
        {"psd.spacing", [](const Draft& d) { return format_double(d.cfg.psd.spacing); },
         [](Draft& d, const std::string& v) { d.cfg.psd.spacing = positive(v); }},
        {"psd.composite_factor", [](const Draft& d) { return std::to_string(d.cfg.psd.composite_factor); },
         [](Draft& d, const std::string& v) { d.cfg.psd.composite_factor = int_in(v, 1, 256); }},
        {"psd.blocks", [](const Draft& d) { return std::to_string(d.cfg.psd.blocks); },
         [](Draft& d, const std::string& v) { d.cfg.psd.blocks = count_of(v); }},
        {"psd.segment", [](const Draft& d) { return std::to_string(d.cfg.psd.segment); },
         [](Draft& d, const std::string& v) { d.cfg.psd.segment = static_cast<std::size_t>(int_in(v, 16, 1 << 24)); }},
    };
    return keys;
}

// Folds the draft into a config and checks cross-field constraints.
ExperimentConfig finish(Draft& d, std::vector<std::string>& problems) {
    ExperimentConfig c = d.cfg;
    auto check = [&](auto&& f) {
        try {
            f();
        } catch (const std::exception& e) {
            problems.emplace_back(e.what());
        }
    };
    c.link.pa.reset();
    if (d.pa_on) {
        c.link.pa = d.pa;
        check([&] { d.pa.validate(); });
    }
    c.link.opbo_db = d.opbo_db;
    c.link.pn.reset();
    if (d.pn_on) {
        impair::PnPsdSpec pn;
        pn.carrier_hz = d.pn_carrier_hz;
        pn.breakpoints = d.pn_breakpoints;
        pn.floor_dbc_hz = d.pn_floor ? *d.pn_floor : impair::default_pn_spec(d.pn_carrier_hz).floor_dbc_hz;
        c.link.pn = pn;
        check([&] { pn.validate(); });
    }
    c.link.quantizer.reset();
    if (d.q_on) c.link.quantizer = d.q;
    c.link.seed = c.seed;
    c.link.workers = c.workers;

    using K = ExperimentKind;
    const bool uses_link = c.kind == K::BlerSweep || c.kind == K::OpboTable || c.kind == K::PnComparison;
    if (uses_link) check([&] { c.link.validate(); });
    if (c.kind == K::PnComparison) {
        if (!c.link.pn) problems.emplace_back("pn_comparison needs link.pn.enabled = true");
        for (const auto& w : c.pn.waveforms)
            if (waveform::parse_waveform(w) == waveform::Waveform::CpmDftsOfdm)
                problems.emplace_back("pn_comparison cannot compare CPM (no pilots)");
    }
    if (c.kind == K::OpboTable && !c.link.pa) problems.emplace_back("opbo_table needs link.pa.enabled = true");
    if (c.kind == K::ZxmBer || c.kind == K::ZxmRate) {
        check([&] { c.zxm.spec.validate(); });
        if (c.kind == K::ZxmBer) {
            check([&] {
                const auto pulse = sigcore::FilterSpec::rrc(c.zxm.roll_off, c.zxm.span_symbols, c.zxm.oversampling);
                const int u = zxm::samples_per_symbol(c.zxm.spec, pulse);
                require(u % c.zxm.rx_oversample == 0, "zxm.rx_oversample must divide oversampling / ftn_factor");
                zxm::rl_payload_bits(c.zxm.spec);
            });
        }
    }
    if (c.kind == K::LatencySweep) check([&] { c.latency.scenario.validate(); });
    if (c.kind == K::PaprCcdf) {
        check([&] {
            waveform::BlockFormat f = c.link.block;
            f.oversampling = c.papr.oversampling;
            f.validate();
            waveform::scfde_symbols_per_block(f, c.papr.scfde_oversampling);
        });
    }
    if (c.kind == K::MulticarrierPsd && c.psd.spacing * c.psd.channels > c.psd.composite_factor)
        problems.emplace_back("psd: channels do not fit into the composite band (channels * spacing > composite_factor)");
    return c;
}

}  // namespace

std::string to_string(ExperimentKind k) {
    for (const auto& [kk, name] : kind_names())
        if (kk == k) return name;
    return "unknown";
}

ExperimentKind parse_kind(const std::string& name) {
    std::string all;
    for (const auto& [k, n] : kind_names()) {
        if (n == name) return k;
        all += (all.empty() ? "" : ", ") + n;
    }
    throw InvalidArgument("unknown experiment '" + name + "' (allowed: " + all + ")");
}

ConfigError::ConfigError(std::vector<Diagnostic> diags)
    : std::runtime_error([&] {
          std::string s = std::to_string(diags.size()) + " configuration error(s):";
          for (const auto& d : diags)
              s += "\n  " + (d.line > 0 ? "line " + std::to_string(d.line) + ": " : std::string()) + d.message;
          return s;
      }()),
      diags_(std::move(diags)) {}

std::vector<double> parse_range(const std::string& text) {
    const std::string t = trim(text);
    require(!t.empty(), "empty value list");
    if (t.find(':') != std::string::npos) {
        const auto p = split(t, ':');
        require(p.size() == 3, "ranges are written start:stop:step, got '" + t + "'");
        const double a = to_double(p[0]), b = to_double(p[1]), step = to_double(p[2]);
        require(step > 0.0, "range step must be positive");
        require(b >= a, "range stop must not precede start");
        const auto n = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
        require(n <= 1000000, "range has too many points");
        std::vector<double> out(n);
        // Snap to a 1e-12 grid so 0:1:0.05 gives 0.35 rather than 0.35000000000000003.
        for (std::size_t i = 0; i < n; ++i) out[i] = std::round((a + static_cast<double>(i) * step) * 1e12) / 1e12;
        return out;
    }
    std::vector<double> out;
    for (const auto& x : nonempty_list(t)) out.push_back(to_double(x));
    return out;
}

std::vector<double> default_alpha_grid() { return parse_range("0:1:0.05"); }

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& k : registry()) out.push_back(k.name);
    return out;
}

ExperimentConfig parse_config(const std::string& text) {
    std::map<std::string, const Key*> index;
    for (const auto& k : registry()) index[k.name] = &k;

    Draft d;
    d.kind_seen = false;
    std::vector<Diagnostic> diags;
    std::map<std::string, int> seen;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    int kind_line = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            diags.push_back({line_no, "expected 'key = value', got '" + line + "'"});
            continue;
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = index.find(key);
        if (it == index.end()) {
            diags.push_back({line_no, "unknown key '" + key + "'"});
            continue;
        }
        if (const auto prev = seen.find(key); prev != seen.end()) {
            diags.push_back({line_no, "duplicate key '" + key + "' (first set on line " + std::to_string(prev->second) + ")"});
            continue;
        }
        seen[key] = line_no;
        if (key == "experiment") kind_line = line_no;
        try {
            it->second->set(d, value);
        } catch (const std::exception& e) {
            diags.push_back({line_no, key + ": " + e.what()});
        }
    }
    if (!d.kind_seen && kind_line == 0) diags.push_back({0, "missing required key 'experiment'"});

    std::vector<std::string> problems;
    ExperimentConfig cfg = finish(d, problems);
    for (auto& p : problems) diags.push_back({kind_line, std::move(p)});
    if (!diags.empty()) throw ConfigError(std::move(diags));
    return cfg;
}

std::string serialize(const ExperimentConfig& cfg) {
    const Draft d = draft_of(cfg);
    std::string out;
    for (const auto& k : registry()) out += k.name + " = " + k.get(d) + "\n";
    return out;
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw RuntimeFailure("SHA-256 computation failed");
    static const char* hex = "0123456789abcdef";
    std::string s;
    for (unsigned int i = 0; i < len; ++i) {
        s.push_back(hex[md[i] >> 4]);
        s.push_back(hex[md[i] & 15]);
    }
    return s;
}

std::string config_digest(const ExperimentConfig& cfg) {
    // Neither the worker count nor the output directory changes any result.
    ExperimentConfig c = cfg;
    c.workers = 1;
    c.link.workers = 1;
    c.output = "out";
    return sha256_hex(serialize(c));
}

}  // namespace subthz::harness
