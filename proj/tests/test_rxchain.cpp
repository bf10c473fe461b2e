#include <cmath>
#include <limits>

#include "doctest.h"
#include "subthz/rxchain.hpp"
#include "subthz/sigcore.hpp"
#include "subthz/waveform.hpp"

using namespace subthz;
using namespace subthz::rxchain;

TEST_CASE("per-bin equalizer formulas") {
    Rng rng(2);
    CVec y(64), h(64);
    for (auto& v : y) v = rng.complex_normal(1.0);
    for (auto& v : h) v = rng.complex_normal(1.0);
    const double nv = 0.3;
    const auto zf = fde_equalize(y, h, EqualizerMode::ZeroForcing, nv);
    const auto mm = fde_equalize(y, h, EqualizerMode::Mmse, nv);
    for (std::size_t k = 0; k < y.size(); ++k) {
        // written out on real and imaginary parts
        const double hr = h[k].real(), hi = h[k].imag(), yr = y[k].real(), yi = y[k].imag();
        const double d = hr * hr + hi * hi;
        const cplx zf_ref{(yr * hr + yi * hi) / d, (yi * hr - yr * hi) / d};
        const cplx mm_ref{(yr * hr + yi * hi) / (d + nv), (yi * hr - yr * hi) / (d + nv)};
        CHECK(std::abs(zf[k] - zf_ref) < 1e-12 * (1.0 + std::abs(zf_ref)));
        CHECK(std::abs(mm[k] - mm_ref) < 1e-12);
    }
    // mmse with zero noise is zero forcing
    const auto m0 = fde_equalize(y, h, EqualizerMode::Mmse, 0.0);
    for (std::size_t k = 0; k < y.size(); ++k) CHECK(std::abs(m0[k] - zf[k]) < 1e-12 * (1.0 + std::abs(zf[k])));

    CVec hz = h;
    hz[3] = 0.0;
    CHECK_THROWS_AS(fde_equalize(y, hz, EqualizerMode::ZeroForcing, nv), InvalidArgument);
    CHECK(fde_equalize(y, hz, EqualizerMode::Mmse, nv)[3] == cplx(0.0, 0.0));
    CHECK_THROWS_AS(fde_equalize(y, CVec(3), EqualizerMode::Mmse, nv), InvalidArgument);
}

TEST_CASE("equalizing a circular channel restores the block") {
    Rng rng(3);
    const std::size_t n = 128;
    CVec x(n), taps{cplx{1.0, 0.0}, cplx{0.4, -0.2}, cplx{0.1, 0.3}};
    for (auto& v : x) v = rng.complex_normal(1.0);
    CVec y(n, cplx{0.0, 0.0});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t = 0; t < taps.size(); ++t) y[(i + t) % n] += x[i] * taps[t];
    CVec hp(n, cplx{0.0, 0.0});
    std::copy(taps.begin(), taps.end(), hp.begin());
    auto H = sigcore::dft(hp);
    for (auto& v : H) v *= std::sqrt(double(n));
    const auto X = fde_equalize(sigcore::dft(y), H, EqualizerMode::ZeroForcing, 0.0);
    const auto xr = sigcore::idft(X);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(xr[i] - x[i]) < 1e-9);
}

TEST_CASE("common phase error is removed exactly on a constant offset") {
    Rng rng(4);
    CVec block(200);
    for (auto& v : block) v = std::polar(1.0, 2.0 * kPi * rng.uniform());
    std::vector<std::size_t> pos;
    CVec refs;
    for (std::size_t i = 0; i < 16; ++i) {
        pos.push_back(i);
        refs.push_back(block[i]);
    }
    for (double phi : {0.0, 0.3, -2.0, 3.0}) {
        CVec rx = block;
        for (auto& v : rx) v *= std::polar(1.0, phi);
        const auto r = cpe_compensate(rx, pos, refs);
        CHECK(r.phase_estimate == doctest::Approx(phi).epsilon(1e-12));
        double err_before = 0.0, err_after = 0.0;
        for (std::size_t i = 0; i < block.size(); ++i) {
            err_before += std::norm(std::arg(rx[i] / block[i]));
            err_after += std::norm(std::arg(r.symbols[i] / block[i]));
        }
        CHECK(err_after <= err_before + 1e-18);
        CHECK(err_after < 1e-20);
    }
    CHECK_THROWS_AS(cpe_compensate(block, std::vector<std::size_t>{}, CVec{}), InvalidArgument);
}

TEST_CASE("cpm detection recovers noiseless bits") {
    Rng rng(5);
    for (const auto& spec : {waveform::CpmSpec{}, waveform::CpmSpec{1, 4, 8, 2}, waveform::CpmSpec{2, 3, 6, 6}}) {
        const auto bits = rng.bits(300);
        CHECK(cpm_detect(waveform::cpm_precode(bits, spec), spec) == bits);
    }
}

TEST_CASE("cpm detection is the minimum-distance sequence") {
    const waveform::CpmSpec spec{};
    constexpr std::size_t n = 10;
    std::vector<CVec> book;
    for (unsigned m = 0; m < (1u << n); ++m) {
        Bits b(n);
        for (std::size_t i = 0; i < n; ++i) b[i] = (m >> i) & 1U;
        book.push_back(waveform::cpm_precode(b, spec));
    }
    Rng rng(6);
    for (int trial = 0; trial < 30; ++trial) {
        CVec r = book[rng.next_u64() % book.size()];
        for (auto& v : r) v += rng.complex_normal(0.8);
        double best = std::numeric_limits<double>::infinity();
        unsigned best_m = 0;
        for (unsigned m = 0; m < book.size(); ++m) {
            double d = 0.0;
            for (std::size_t i = 0; i < r.size(); ++i) d += std::norm(r[i] - book[m][i]);
            if (d < best) {
                best = d;
                best_m = m;
            }
        }
        const auto dec = cpm_detect(r, spec);
        unsigned dm = 0;
        for (std::size_t i = 0; i < n; ++i) dm |= unsigned(dec[i]) << i;
        CHECK(dm == best_m);
    }
}
