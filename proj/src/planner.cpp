#include "subthz/planner.hpp"

#include <cmath>

namespace subthz::planner {

void Numerology::validate() const {
    require(scs_hz > 0.0 && std::isfinite(scs_hz), "numerology: scs must be positive");
    require(n_fft > 0 && n_cp >= 0, "numerology: n_fft must be positive and n_cp non-negative");
    require(guard_fraction >= 0.0 && guard_fraction < 1.0, "numerology: guard_fraction must be in [0, 1)");
}

NumerologyRow numerology_derive(const Numerology& n) {
    n.validate();
    const double ts = 1.0 / (n.scs_hz * n.n_fft);
    const double block = (n.n_fft + n.n_cp) * ts;
    return {n.scs_hz / 1e3, ts * 1e9, block * 1e6, 2 * block * 1e6, 14 * block * 1e6,
            (1.0 - n.guard_fraction) / ts / 1e9};
}

double slot_us(const Numerology& n, int n_blocks) {
    require(n_blocks >= 1, "slot: n_blocks must be >= 1");
    return n_blocks * numerology_derive(n).t_block_us;
}

double proc_time(double alpha, Side side, double base_tx_us, double base_rx_us) {
    require(alpha >= 0.0 && alpha <= 1.0, "proc_time: alpha must be in [0, 1], got " + format_double(alpha));
    return alpha * (side == Side::Tx ? base_tx_us : base_rx_us);
}

void LatencyScenario::validate() const {
    numerology.validate();
    require(n_blocks >= 1, "latency: n_blocks must be >= 1");
    require(alpha >= 0.0 && alpha <= 1.0, "latency: alpha must be in [0, 1], got " + format_double(alpha));
    require(n_retx >= 0, "latency: n_retx must be >= 0");
    require(proc_base_tx_us >= 0.0 && proc_base_rx_us >= 0.0, "latency: processing bases must be non-negative");
    require(!alignment_us || *alignment_us >= 0.0, "latency: alignment must be non-negative");
}

double LatencyScenario::alignment() const { return alignment_us ? *alignment_us : 0.5 * slot_us(numerology, n_blocks); }

namespace {

struct Parts {
    double fixed;  // alignment and slots
    double proc;   // processing at the scenario's alpha
};

Parts parts(const LatencyScenario& s) {
    s.validate();
    const double slot = slot_us(s.numerology, s.n_blocks);
    const double tx = proc_time(s.alpha, Side::Tx, s.proc_base_tx_us, s.proc_base_rx_us);
    const double rx = proc_time(s.alpha, Side::Rx, s.proc_base_tx_us, s.proc_base_rx_us);
    return {s.alignment() + slot + 2.0 * s.n_retx * slot, (tx + rx) * (1.0 + s.n_retx)};
}

}  // namespace

double user_plane_latency(const LatencyScenario& s) {
    const Parts p = parts(s);
    return p.fixed + p.proc;
}

double processing_fraction(const LatencyScenario& s) {
    const Parts p = parts(s);
    return p.proc / (p.fixed + p.proc);
}

std::optional<std::pair<double, double>> alpha_interval(const LatencyScenario& s, double budget_us) {
    LatencyScenario z = s;
    z.alpha = 0.0;
    const Parts p = parts(z);
    if (p.fixed > budget_us) return std::nullopt;
    // Latency is affine in alpha with slope (tx + rx bases) * (1 + n_retx).
    const double slope = (s.proc_base_tx_us + s.proc_base_rx_us) * (1.0 + s.n_retx);
    const double hi = slope > 0.0 ? std::min(1.0, (budget_us - p.fixed) / slope) : 1.0;
    return std::make_pair(0.0, hi);
}

std::vector<LatencyPoint> latency_sweep(const LatencyScenario& base, const std::vector<double>& alphas,
                                        const std::vector<int>& retx) {
    std::vector<LatencyPoint> out;
    out.reserve(alphas.size() * retx.size());
    for (int n : retx)
        for (double a : alphas) {
            LatencyScenario s = base;
            s.alpha = a;
            s.n_retx = n;
            out.push_back({a, n, user_plane_latency(s), processing_fraction(s)});
        }
    return out;
}

double pn_floor_scale(double level_dbc_hz, double f_ref_hz, double f_target_hz) {
    require(f_ref_hz > 0.0 && f_target_hz > 0.0, "pn_floor_scale: frequencies must be positive");
    return level_dbc_hz + 20.0 * std::log10(f_target_hz / f_ref_hz);
}

double pn_floor_snr(double level_dbc_hz, double bandwidth_hz) {
    require(bandwidth_hz > 0.0, "pn_floor_snr: bandwidth must be positive");
    return -(level_dbc_hz + 10.0 * std::log10(bandwidth_hz));
}

double pa_psat_scale(double p_ref_dbm, double f_ref_hz, double f_target_hz) {
    require(f_ref_hz > 0.0 && f_target_hz > 0.0, "pa_psat_scale: frequencies must be positive");
    require(f_ref_hz >= 100e9 && f_target_hz >= 100e9,
            "pa_psat_scale: the f^-3 law is valid only at and above 100 GHz (got " + format_double(f_ref_hz / 1e9) +
                " GHz -> " + format_double(f_target_hz / 1e9) + " GHz)");
    return p_ref_dbm - 30.0 * std::log10(f_target_hz / f_ref_hz);
}

double fspl_db(double f_hz, double d_m) {
    require(f_hz > 0.0 && d_m > 0.0, "fspl_db: frequency and distance must be positive");
    constexpr double c = 299792458.0;
    return 20.0 * std::log10(4.0 * kPi * d_m * f_hz / c);
}

namespace {
// Power relative to an arbitrary constant: linear to the knee, quadratic past it.
double adc_shape(double fs) { return fs <= kAdcKneeHz ? fs : fs * fs / kAdcKneeHz; }
}  // namespace

double adc_power_scale(double p_ref, double fs_ref_hz, double fs_target_hz) {
    require(fs_ref_hz > 0.0 && fs_target_hz > 0.0, "adc_power_scale: sampling rates must be positive");
    return p_ref * adc_shape(fs_target_hz) / adc_shape(fs_ref_hz);
}

}  // namespace subthz::planner
