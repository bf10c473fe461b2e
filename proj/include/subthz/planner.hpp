#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "subthz/common.hpp"

namespace subthz::planner {

struct Numerology {
    double scs_hz = 480e3;
    int n_fft = 2048;
    int n_cp = 144;
    double guard_fraction = 0.4;  // occupied fraction 1 - guard_fraction

    void validate() const;
};

struct NumerologyRow {
    double scs_khz;
    double ts_ns;
    double t_block_us;
    double t_slot2_us;
    double t_slot14_us;
    double bw_ghz;
};

NumerologyRow numerology_derive(const Numerology& n);

/// Slot duration in microseconds for n_blocks blocks.
double slot_us(const Numerology& n, int n_blocks);

enum class Side { Tx, Rx };

/// alpha * 80 us on the transmit side, alpha * 98.2 us on the receive side.
double proc_time(double alpha, Side side, double base_tx_us = 80.0, double base_rx_us = 98.2);

struct LatencyScenario {
    Numerology numerology{};
    int n_blocks = 2;
    double alpha = 1.0;
    int n_retx = 0;
    double proc_base_tx_us = 80.0;
    double proc_base_rx_us = 98.2;
    /// Frame alignment wait; unset means half a slot.
    std::optional<double> alignment_us;

    void validate() const;
    double alignment() const;
};

/// alignment + T_tx + T_slot + T_rx + n_retx * (T_rx + T_slot + T_tx + T_slot).
double user_plane_latency(const LatencyScenario& s);

/// Share of the latency spent in transmit and receive processing.
double processing_fraction(const LatencyScenario& s);

/// Closed alpha interval within [0, 1] for which the latency stays at or below
/// `budget_us`; empty when even alpha = 0 misses the budget.
std::optional<std::pair<double, double>> alpha_interval(const LatencyScenario& s, double budget_us);

struct LatencyPoint {
    double alpha;
    int n_retx;
    double latency_us;
    double proc_fraction;
};

std::vector<LatencyPoint> latency_sweep(const LatencyScenario& base, const std::vector<double>& alphas,
                                        const std::vector<int>& retx);

/// Phase-noise floor moved from f_ref to f_target with the 20 log10 law.
double pn_floor_scale(double level_dbc_hz, double f_ref_hz, double f_target_hz);
/// SNR ceiling set by a white phase-noise floor over a bandwidth.
double pn_floor_snr(double level_dbc_hz, double bandwidth_hz);
/// PA saturated output moved with the f^-3 law; valid for both frequencies >= 100 GHz.
double pa_psat_scale(double p_ref_dbm, double f_ref_hz, double f_target_hz);
double fspl_db(double f_hz, double d_m);

inline constexpr double kAdcKneeHz = 500e6;
/// ADC power versus sampling rate: linear up to the knee, quadratic beyond,
/// continuous at the knee.
double adc_power_scale(double p_ref, double fs_ref_hz, double fs_target_hz);

}  // namespace subthz::planner
