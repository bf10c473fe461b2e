#include <cmath>
#include <string>

#include "doctest.h"
#include "subthz/planner.hpp"

using namespace subthz;
using namespace subthz::planner;

namespace {

// Half a unit in the last printed digit of a table entry.
double half_ulp(const std::string& printed) {
    const auto dot = printed.find('.');
    const int decimals = dot == std::string::npos ? 0 : static_cast<int>(printed.size() - dot - 1);
    return 0.5 * std::pow(10.0, -decimals) + 1e-12;
}

struct PrintedRow {
    double scs_khz;
    const char* cells[5];  // T_s ns, T_block us, T_slot(2) us, T_slot(14) us, BW GHz
};

const PrintedRow kTable[] = {
    {480, {"1.02", "2.23", "4.46", "31.2", "0.59"}},
    {960, {"0.5", "1.11", "2.23", "15.6", "1.18"}},
    {1920, {"0.25", "0.56", "1.11", "7.8", "2.36"}},
    {3840, {"0.13", "0.28", "0.56", "3.9", "4.72"}},
};

LatencyScenario scenario(double scs_khz, int blocks, double alpha, int retx) {
    LatencyScenario s;
    s.numerology.scs_hz = scs_khz * 1e3;
    s.n_blocks = blocks;
    s.alpha = alpha;
    s.n_retx = retx;
    return s;
}

}  // namespace

TEST_CASE("numerology reproduces the printed table within rounding") {
    for (const auto& row : kTable) {
        Numerology n;
        n.scs_hz = row.scs_khz * 1e3;
        const auto d = numerology_derive(n);
        const double got[5] = {d.ts_ns, d.t_block_us, d.t_slot2_us, d.t_slot14_us, d.bw_ghz};
        CHECK(d.scs_khz == row.scs_khz);
        for (int i = 0; i < 5; ++i) {
            CAPTURE(row.scs_khz);
            CAPTURE(i);
            CHECK(std::abs(got[i] - std::stod(row.cells[i])) <= half_ulp(row.cells[i]));
        }
    }
}

TEST_CASE("numerology relations") {
    Numerology n;
    const auto d = numerology_derive(n);
    CHECK(d.t_block_us == doctest::Approx((2048 + 144) * d.ts_ns * 1e-3));
    CHECK(d.t_slot2_us == doctest::Approx(2 * d.t_block_us));
    CHECK(slot_us(n, 14) == doctest::Approx(d.t_slot14_us));
    CHECK(d.bw_ghz == doctest::Approx(0.6 / d.ts_ns));
    n.scs_hz = -1.0;
    CHECK_THROWS_AS(numerology_derive(n), InvalidArgument);
}

TEST_CASE("processing time scales with alpha") {
    CHECK(proc_time(1.0, Side::Tx) == 80.0);
    CHECK(proc_time(1.0, Side::Rx) == 98.2);
    CHECK(proc_time(0.25, Side::Rx) == doctest::Approx(24.55));
    CHECK_THROWS_AS(proc_time(1.5, Side::Tx), InvalidArgument);
}

TEST_CASE("latency formula") {
    auto s = scenario(480, 2, 1.0, 0);
    const double slot = slot_us(s.numerology, 2);
    CHECK(user_plane_latency(s) == doctest::Approx(slot / 2 + 80.0 + slot + 98.2));
    s.n_retx = 1;
    CHECK(user_plane_latency(s) == doctest::Approx(slot / 2 + 2 * (80.0 + 98.2) + 3 * slot));
    s.alignment_us = 0.0;
    CHECK(user_plane_latency(s) == doctest::Approx(2 * (80.0 + 98.2) + 3 * slot));
}

TEST_CASE("latency is strictly monotone in alpha, retransmissions and slot length") {
    for (double scs : {480.0, 3840.0})
        for (int blocks : {1, 2, 4, 14})
            for (int retx = 0; retx <= 2; ++retx)
                for (double a = 0.0; a < 0.85; a += 0.1) {
                    const double l = user_plane_latency(scenario(scs, blocks, a, retx));
                    CHECK(user_plane_latency(scenario(scs, blocks, a + 0.1, retx)) > l);
                    CHECK(user_plane_latency(scenario(scs, blocks, a, retx + 1)) > l);
                    CHECK(user_plane_latency(scenario(scs, blocks + 1, a, retx)) > l);
                }
}

TEST_CASE("alpha interval meets the budget at its edge") {
    const auto s = scenario(3840, 2, 1.0, 1);
    const auto iv = alpha_interval(s, 100.0);
    REQUIRE(iv.has_value());
    CHECK(iv->first == 0.0);
    auto edge = s;
    edge.alpha = iv->second;
    CHECK(user_plane_latency(edge) == doctest::Approx(100.0));
    CHECK_FALSE(alpha_interval(scenario(480, 14, 1.0, 2), 10.0).has_value());
    const auto whole = alpha_interval(scenario(3840, 2, 1.0, 0), 1000.0);
    REQUIRE(whole.has_value());
    CHECK(whole->second == 1.0);
}

TEST_CASE("latency sweep covers the grid") {
    const auto pts = latency_sweep(scenario(480, 2, 1.0, 0), {0.0, 0.5, 1.0}, {0, 1});
    CHECK(pts.size() == 6u);
    for (const auto& p : pts) {
        CHECK(p.proc_fraction >= 0.0);
        CHECK(p.proc_fraction < 1.0);
    }
}

TEST_CASE("phase-noise floor arithmetic") {
    CHECK(pn_floor_scale(-145.0, 10e9, 10e9) == -145.0);
    CHECK(std::abs(pn_floor_scale(-145.0, 10e9, 150e9) - (-121.0)) < 0.5);
    CHECK(std::abs(pn_floor_scale(-145.0, 10e9, 300e9) - (-115.0)) < 0.5);
    CHECK(std::abs(pn_floor_snr(pn_floor_scale(-145.0, 10e9, 150e9), 10e9) - 21.0) < 0.5);
    CHECK(std::abs(pn_floor_snr(pn_floor_scale(-145.0, 10e9, 300e9), 10e9) - 15.0) < 0.5);
    CHECK(pn_floor_snr(-100.0, 1e9) == doctest::Approx(10.0));
}

TEST_CASE("hardware scaling laws") {
    CHECK(pa_psat_scale(20.0, 100e9, 200e9) == doctest::Approx(20.0 - 30.0 * std::log10(2.0)));
    CHECK_THROWS_AS(pa_psat_scale(20.0, 60e9, 140e9), InvalidArgument);
    CHECK(fspl_db(280e9, 10.0) - fspl_db(140e9, 10.0) == doctest::Approx(20.0 * std::log10(2.0)));
    CHECK(fspl_db(1e9, 1.0) == doctest::Approx(20.0 * std::log10(4.0 * kPi * 1e9 / 299792458.0)));
    CHECK(adc_power_scale(1.0, 1e9, 2e9) == doctest::Approx(4.0));
    CHECK(adc_power_scale(1.0, 100e6, 200e6) == doctest::Approx(2.0));
    // continuous at the knee and monotone
    CHECK(adc_power_scale(1.0, 100e6, kAdcKneeHz * (1 + 1e-12)) == doctest::Approx(adc_power_scale(1.0, 100e6, kAdcKneeHz)));
    double prev = 0.0;
    for (double fs = 1e6; fs < 1e11; fs *= 1.3) {
        const double p = adc_power_scale(1.0, 1e9, fs);
        CHECK(p > prev);
        prev = p;
    }
}
