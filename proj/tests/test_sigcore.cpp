#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "subthz/mapping.hpp"
#include "subthz/sigcore.hpp"

using namespace subthz;
using namespace subthz::sigcore;

namespace {

CVec random_vec(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    CVec x(n);
    for (auto& v : x) v = rng.complex_normal(1.0);
    return x;
}

using oracle::rrc_by_spectrum;

}  // namespace

TEST_CASE("rrc impulse matches the inverse transform of the root spectrum") {
    for (double beta : {0.1, 0.22, 0.3, 0.5, 1.0}) {
        std::vector<double> ts{0.0, 0.1, 0.5, 1.0, 1.37, 2.5, -3.25};
        ts.push_back(1.0 / (4.0 * beta));  // analytic-limit points
        ts.push_back(-1.0 / (4.0 * beta));
        for (double t : ts) {
            CAPTURE(beta);
            CAPTURE(t);
            CHECK(rrc_impulse(t, beta) == doctest::Approx(rrc_by_spectrum(t, beta)).epsilon(1e-6));
        }
    }
    CHECK(rrc_impulse(0.0, 0.22) == doctest::Approx(1.0 - 0.22 + 4.0 * 0.22 / kPi));
}

TEST_CASE("rrc taps are symmetric and unit energy over a parameter grid") {
    for (double beta : {0.05, 0.22, 0.5, 1.0})
        for (int span : {4, 8, 16})
            for (int os : {1, 2, 4, 8}) {
                const auto taps = rrc_taps(FilterSpec::rrc(beta, span, os));
                REQUIRE(taps.size() == static_cast<std::size_t>(span * os + 1));
                double e = 0.0;
                for (double v : taps) e += v * v;
                CHECK(e == doctest::Approx(1.0).epsilon(1e-12));
                for (std::size_t i = 0; i < taps.size(); ++i) CHECK(taps[i] == doctest::Approx(taps[taps.size() - 1 - i]));
            }
}

TEST_CASE("filter spec validation") {
    CHECK_THROWS_AS(FilterSpec::rrc(-0.1, 8, 4).validate(), InvalidArgument);
    CHECK_NOTHROW(FilterSpec::rrc(0.0, 8, 4).validate());
    CHECK_THROWS_AS(FilterSpec::rrc(1.2, 8, 4).validate(), InvalidArgument);
    CHECK_THROWS_AS(FilterSpec::rrc(0.2, 0, 4).validate(), InvalidArgument);
    CHECK_THROWS_AS(FilterSpec::custom({}, 4).validate(), InvalidArgument);
    CHECK_NOTHROW(FilterSpec::custom({1.0}, 1).validate());
}

TEST_CASE("dft roundtrip and Parseval") {
    for (std::size_t n : {64u, 2048u, 4096u, 1000u}) {
        const auto x = random_vec(n, n);
        const auto X = dft(x);
        CHECK(energy(X) == doctest::Approx(energy(x)).epsilon(1e-9));
        const auto y = idft(X);
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::abs(y[i] - x[i]));
        CHECK(err < 1e-9);
    }
}

TEST_CASE("dft of a single complex exponential is a unitary spike") {
    const std::size_t n = 128, k = 5;
    CVec x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = std::polar(1.0, 2.0 * kPi * double(k * i) / double(n));
    const auto X = dft(x);
    CHECK(std::abs(X[k] - cplx(std::sqrt(double(n)), 0.0)) < 1e-9);
    for (std::size_t i = 0; i < n; ++i)
        if (i != k) CHECK(std::abs(X[i]) < 1e-9);
}

TEST_CASE("papr is non-negative and zero only for constant envelope") {
    CVec tone(256);
    for (std::size_t i = 0; i < tone.size(); ++i) tone[i] = std::polar(2.0, 0.3 * double(i));
    CHECK(std::abs(papr_db(tone)) < 1e-12);
    for (std::uint64_t s = 1; s < 20; ++s) CHECK(papr_db(random_vec(64, s)) > 1e-6);
    CVec one_peak(10, cplx{1.0, 0.0});
    one_peak[3] = 2.0;
    // max 4, mean 13/10
    CHECK(papr_db(one_peak) == doctest::Approx(10.0 * std::log10(4.0 / 1.3)));
}

TEST_CASE("ccdf uses strict exceedance and is monotone") {
    const std::vector<double> samples{1.0, 2.0, 2.0, 3.0};
    const std::vector<double> th{0.5, 1.0, 2.0, 2.5, 3.0};
    const auto c = ccdf(samples, th);
    REQUIRE(c.size() == th.size());
    CHECK(c[0].probability == 1.0);
    CHECK(c[1].probability == 0.75);
    CHECK(c[2].probability == 0.25);
    CHECK(c[3].probability == 0.25);
    CHECK(c[4].probability == 0.0);

    Rng rng(3);
    std::vector<double> s(5000);
    for (auto& v : s) v = 5.0 + rng.normal();
    std::vector<double> grid;
    for (double t = 0.0; t < 10.0; t += 0.05) grid.push_back(t);
    const auto cc = ccdf(s, grid);
    for (std::size_t i = 1; i < cc.size(); ++i) CHECK(cc[i].probability <= cc[i - 1].probability);
}

TEST_CASE("papr_at_ccdf is the smallest threshold meeting the probability") {
    std::vector<double> s;
    for (int i = 1; i <= 100; ++i) s.push_back(i);
    const double t = papr_at_ccdf(s, 0.05);
    const std::vector<double> th{t};
    CHECK(ccdf(s, th)[0].probability <= 0.05);
    const std::vector<double> below{t - 1e-9};
    CHECK(ccdf(s, below)[0].probability > 0.05);
}

TEST_CASE("psd estimate equals an independent Welch computation") {
    const std::size_t seg = 32, n = 200;
    const double fs = 8.0;
    const auto x = random_vec(n, 11);
    const auto bins = psd_estimate(ComplexSignal(x, fs), seg);
    REQUIRE(bins.size() == seg);

    for (std::size_t b = 0; b < seg; ++b) {
        const double f = bins[b].freq_hz;
        CHECK(f == doctest::Approx(-fs / 2 + double(b) * fs / double(seg)));
        CHECK(bins[b].density == doctest::Approx(oracle::welch_at(x, fs, seg, f)).epsilon(1e-9));
    }
}

TEST_CASE("psd of white noise integrates to its power") {
    const double fs = 1e6, var = 2.5;
    Rng rng(5);
    CVec x(1 << 16);
    for (auto& v : x) v = rng.complex_normal(var);
    const auto bins = psd_estimate(ComplexSignal(x, fs), 256);
    double p = 0.0;
    for (const auto& b : bins) p += b.density * fs / 256.0;
    CHECK(p == doctest::Approx(var).epsilon(0.03));
}

TEST_CASE("upsample_filter length and impulse response") {
    const RVec taps{1.0, 2.0, 3.0};
    const CVec sym{cplx{1, 0}, cplx{0, 1}};
    const auto y = upsample_filter(sym, taps, 2);
    REQUIRE(y.size() == 5u);
    CHECK(y[0] == cplx(1, 0));
    CHECK(y[1] == cplx(2, 0));
    CHECK(y[2] == cplx(3, 1));
    CHECK(y[3] == cplx(0, 2));
    CHECK(y[4] == cplx(0, 3));
}

TEST_CASE("upsample_bandlimited preserves amplitude of a band-limited tone") {
    CVec x(64);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::polar(1.0, 2.0 * kPi * 3.0 * double(i) / 64.0);
    const auto y = upsample_bandlimited(x, 4);
    REQUIRE(y.size() == 256u);
    for (std::size_t i = 0; i < y.size(); ++i)
        CHECK(std::abs(y[i] - std::polar(1.0, 2.0 * kPi * 3.0 * double(i) / 256.0)) < 1e-9);
}

TEST_CASE("occupied bandwidth of an rrc pulse stays inside 1 + roll-off") {
    const auto taps = rrc_taps(FilterSpec::rrc(0.22, 16, 8));
    const double bw = occupied_bandwidth(taps, 8, 0.99);
    CHECK(bw < 1.22);
    CHECK(bw > 0.9);
}

TEST_CASE("filter optimizer on constant-envelope input is no worse than its base") {
    mapping::ConstellationSpec psk = mapping::constellation_by_name("qpsk");
    FilterDesignOptions opt;
    opt.iterations = 20;
    FilterDesignReport rep;
    const auto base = FilterSpec::rrc(0.22, 8, 4);
    const auto out = optimize_tx_filter(base, psk, 200, 9, opt, &rep);
    CHECK(rep.optimized_papr_db <= rep.base_papr_db + 1e-12);
    const auto again = optimize_tx_filter(base, psk, 200, 9, opt);
    CHECK(filter_taps(out) == filter_taps(again));
}
