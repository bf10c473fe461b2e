#include <algorithm>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "oracles.hpp"
#include "subthz/zxm.hpp"

using namespace subthz;
using namespace subthz::zxm;

namespace {

RunlengthSpec spec_of(int r, int n, int m = 2) { return RunlengthSpec{r, n, m}; }

using oracle::composition_counts;
using oracle::growth_root;

std::vector<std::vector<std::int8_t>> enumerate(int n, int r) { return oracle::runlength_words(n, r); }

Bits payload_of(unsigned v, int k) {
    Bits b(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) b[static_cast<std::size_t>(i)] = (v >> (k - 1 - i)) & 1u;
    return b;
}

ComplexSignal one_bit(const CVec& x) {
    CVec q(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) q[i] = x[i].real() > 0.0 ? 1.0 : -1.0;
    return ComplexSignal(std::move(q), 1.0);
}

}  // namespace

TEST_CASE("runlength counts match exhaustive enumeration and the recurrence") {
    for (int r = 1; r <= 4; ++r) {
        const auto f = composition_counts(16, r);
        for (int n = 1; n <= 16; ++n) {
            CAPTURE(r);
            CAPTURE(n);
            const auto brute = enumerate(n, r).size();
            CHECK(rl_count(n, spec_of(r, n)) == Count(brute));
            CHECK(double(brute) == f[static_cast<std::size_t>(n)]);
        }
    }
    CHECK(rl_count(10, spec_of(2, 10)) == 34);
    CHECK(rl_payload_bits(spec_of(2, 10)) == 5);
    CHECK(to_string(rl_count(120, spec_of(1, 120))) == "664613997892457936451903530140172288");
}

TEST_CASE("runlength validity check") {
    const std::vector<std::int8_t> good{1, 1, -1, -1, -1, 1, 1};
    const std::vector<std::int8_t> short_tail{1, 1, -1, -1, 1};
    const std::vector<std::int8_t> starts_low{-1, -1, 1, 1};
    CHECK(rl_valid(good, 2));
    CHECK_FALSE(rl_valid(good, 3));
    CHECK_FALSE(rl_valid(short_tail, 2));
    CHECK_FALSE(rl_valid(starts_low, 2));
    CHECK_THROWS_AS(rl_rank(short_tail, spec_of(2, 5)), InvalidArgument);
    CHECK_THROWS_AS(spec_of(0, 10).validate(), InvalidArgument);
    CHECK_THROWS_AS(spec_of(2, 10, 0).validate(), InvalidArgument);
}

TEST_CASE("enumerative code is a bijection onto the codebook prefix") {
    for (int r = 1; r <= 4; ++r) {
        const int n = 14;
        const auto s = spec_of(r, n);
        const auto book = enumerate(n, r);
        auto sorted = book;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(rl_rank(sorted[i], s) == Count(i));
        const int k = rl_payload_bits(s);
        for (unsigned v = 0; v < (1u << k); ++v) {
            const auto bits = payload_of(v, k);
            const auto seq = rl_encode(bits, s);
            CHECK(seq == sorted[v]);
            CHECK(rl_decode(seq, s) == bits);
        }
    }
}

TEST_CASE("random payloads survive encode and decode on long blocks") {
    Rng rng(12);
    for (int r : {2, 3, 5}) {
        const auto s = spec_of(r, 128);
        const int k = rl_payload_bits(s);
        for (int t = 0; t < 20000; ++t) {
            const auto bits = rng.bits(static_cast<std::size_t>(k));
            const auto seq = rl_encode(bits, s);
            REQUIRE(rl_valid(seq, r));
            REQUIRE(rl_decode(seq, s) == bits);
        }
    }
}

TEST_CASE("capacity equals the eigenvalue and counting-growth oracles") {
    CHECK(rl_capacity(1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rl_capacity(2) == doctest::Approx(std::log2((1.0 + std::sqrt(5.0)) / 2.0)).epsilon(1e-12));
    for (int r = 1; r <= 6; ++r) {
        CAPTURE(r);
        CHECK(std::abs(rl_capacity(r) - std::log2(growth_root(r))) < 1e-9);
        const double growth = (std::log2(double(rl_count(120, spec_of(r, 120)))) -
                               std::log2(double(rl_count(60, spec_of(r, 60))))) / 60.0;
        CHECK(std::abs(rl_capacity(r) - growth) < 0.01);
    }
    // per-symbol growth of the count; the plain ratio log2(count)/n keeps a
    // log2(constant)/n offset that is still about 0.03 at n = 64
    for (int r = 1; r <= 4; ++r)
        for (int n : {40, 64})
            CHECK(std::abs(std::log2(double(rl_count(n, spec_of(r, n))) / double(rl_count(n - 1, spec_of(r, n - 1)))) -
                           rl_capacity(r)) < 0.01);
}

TEST_CASE("zxm rate monotonicity") {
    for (int m = 1; m <= 4; ++m)
        for (int r = 1; r <= 5; ++r) {
            CHECK(zxm_rate(spec_of(r + 1, 64, m)) <= zxm_rate(spec_of(r, 64, m)));
            CHECK(zxm_rate(spec_of(r, 64, m + 1)) > zxm_rate(spec_of(r, 64, m)));
        }
    CHECK(zxm_rate(spec_of(3, 64, 3)) > 1.0);
}

TEST_CASE("construction length and sample grid") {
    const auto s = spec_of(2, 10);
    const auto pulse = sigcore::FilterSpec::rrc(0.3, 4, 4);
    CHECK(samples_per_symbol(s, pulse) == 2);
    const auto f = zxm_construct(payload_of(9, 5), s, pulse, 2e9);
    CHECK(f.signal.size() == 10u * 2u + sigcore::filter_taps(pulse).size() - 1);
    CHECK(f.signal.sample_rate_hz() == 8e9);
    for (auto v : f.signal.samples()) CHECK(v.imag() == 0.0);
    CHECK(rl_valid(f.symbols, 2));
    CHECK_THROWS_AS(zxm_construct(Bits(4, 0), s, pulse), InvalidArgument);
    CHECK_THROWS_AS(samples_per_symbol(spec_of(2, 10, 3), pulse), InvalidArgument);
}

TEST_CASE("log normal cdf is accurate in the lower tail") {
    CHECK(log_normal_cdf(0.0) == doctest::Approx(std::log(0.5)));
    CHECK(log_normal_cdf(-5.0) == doctest::Approx(std::log(0.5 * std::erfc(5.0 / std::sqrt(2.0)))).epsilon(1e-12));
    // asymptotic -x^2/2 - log(-x sqrt(2 pi))
    const double x = -40.0;
    CHECK(log_normal_cdf(x) == doctest::Approx(-x * x / 2.0 - std::log(-x * std::sqrt(2.0 * kPi))).epsilon(1e-6));
    CHECK(std::isfinite(log_normal_cdf(-1e4)));
    double prev = -std::numeric_limits<double>::infinity();
    for (double v = -60.0; v < 5.0; v += 0.25) {
        CHECK(log_normal_cdf(v) > prev);
        prev = log_normal_cdf(v);
    }
}

TEST_CASE("noiseless one-bit roundtrip recovers every payload") {
    const auto s = spec_of(2, 10);
    const auto pulse = sigcore::FilterSpec::rrc(0.3, 4, 4);
    const int k = rl_payload_bits(s);
    for (int rx : {1, 2}) {
        int ok = 0;
        for (unsigned v = 0; v < (1u << k); ++v) {
            const auto bits = payload_of(v, k);
            const auto f = zxm_construct(bits, s, pulse);
            ok += zxm_detect(one_bit(f.signal.samples()), s, pulse, rx) == bits;
        }
        CAPTURE(rx);
        CHECK(ok == (1 << k));
    }
}

TEST_CASE("detector equals brute-force maximum likelihood under noise") {
    const auto s = spec_of(2, 10);
    const auto pulse = sigcore::FilterSpec::rrc(0.3, 4, 4);
    const int k = rl_payload_bits(s);
    const auto book = enumerate(10, 2);
    DetectorOptions opt;
    Rng rng(31);
    std::size_t ml_err = 0, det_err = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const auto bits = rng.bits(static_cast<std::size_t>(k));
        const auto f = zxm_construct(bits, s, pulse);
        const double sigma = std::sqrt(f.signal.mean_power()) * 0.6;
        opt.noise_std = sigma;
        CVec noisy(f.signal.samples());
        for (auto& v : noisy) v = v.real() + sigma * rng.normal();
        const auto q = one_bit(noisy);
        const auto idx = observation_indices(s, pulse, 2, q.size(), opt);
        std::vector<double> signs;
        for (auto i : idx) signs.push_back(q[i].real());

        double best = -std::numeric_limits<double>::infinity();
        const std::vector<std::int8_t>* best_seq = nullptr;
        for (const auto& cand : book) {
            const double m = sequence_log_metric(cand, signs, s, pulse, 2, opt);
            if (m > best) {
                best = m;
                best_seq = &cand;
            }
        }
        const auto det = zxm_detect_sequence(q, s, pulse, 2, opt);
        CHECK(det.log_metric == doctest::Approx(best).epsilon(1e-9));
        const auto ml_bits = payload_of(static_cast<unsigned>(rl_rank(*best_seq, s) % (Count(1) << k)), k);
        for (int i = 0; i < k; ++i) {
            ml_err += ml_bits[static_cast<std::size_t>(i)] != bits[static_cast<std::size_t>(i)];
            det_err += det.payload[static_cast<std::size_t>(i)] != bits[static_cast<std::size_t>(i)];
        }
    }
    CHECK(ml_err == det_err);
    CHECK(ml_err > 0u);
}

TEST_CASE("detector rejects amplitude inputs and oversized trellises") {
    const auto s = spec_of(2, 10);
    const auto pulse = sigcore::FilterSpec::rrc(0.3, 4, 4);
    const auto f = zxm_construct(payload_of(3, 5), s, pulse);
    CHECK_THROWS_AS(zxm_detect(f.signal, s, pulse, 2), InvalidArgument);
    DetectorOptions opt;
    opt.max_states = 4;
    CHECK_THROWS_AS(zxm_detect(one_bit(f.signal.samples()), s, pulse, 2, opt), RuntimeFailure);
}
