#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "subthz/mapping.hpp"

using namespace subthz;
using namespace subthz::mapping;

namespace {

const char* kNames[] = {"qpsk", "16qam", "64qam", "16apsk", "64apsk"};

Bits label_bits(unsigned label, unsigned m) {
    Bits b(m);
    for (unsigned i = 0; i < m; ++i) b[i] = (label >> (m - 1 - i)) & 1U;
    return b;
}

}  // namespace

TEST_CASE("constellations have unit average power and valid labels") {
    for (const char* name : kNames) {
        CAPTURE(name);
        const auto c = constellation_by_name(name);
        CHECK_NOTHROW(c.validate());
        double p = 0.0;
        for (auto v : c.points) p += std::norm(v);
        CHECK(p / double(c.order()) == doctest::Approx(1.0).epsilon(1e-12));
        std::vector<bool> seen(c.order(), false);
        for (unsigned l : c.labels) {
            REQUIRE(l < c.order());
            CHECK_FALSE(seen[l]);
            seen[l] = true;
        }
    }
}

TEST_CASE("qam is Gray labeled between minimum-distance neighbours") {
    for (unsigned m : {4u, 16u, 64u}) {
        const auto c = build_qam(m);
        const double dmin = c.min_distance();
        int pairs = 0;
        for (std::size_t i = 0; i < c.order(); ++i)
            for (std::size_t j = i + 1; j < c.order(); ++j)
                if (std::abs(std::abs(c.points[i] - c.points[j]) - dmin) < 1e-9) {
                    ++pairs;
                    CHECK(std::popcount(c.labels[i] ^ c.labels[j]) == 1);
                }
        const int side = static_cast<int>(std::lround(std::sqrt(double(m))));
        CHECK(pairs == 2 * side * (side - 1));
    }
}

TEST_CASE("apsk point sets carry lower peak power than qam of the same order") {
    CHECK(constellation_by_name("16apsk").point_papr_db() < constellation_by_name("16qam").point_papr_db());
    CHECK(constellation_by_name("64apsk").point_papr_db() < constellation_by_name("64qam").point_papr_db());
}

TEST_CASE("apsk rings follow the layout") {
    const auto layout = default_apsk16_layout();
    const auto c = build_apsk(layout);
    REQUIRE(c.order() == 16u);
    const double r0 = std::abs(c.points[0]);
    for (int i = 0; i < 4; ++i) CHECK(std::abs(c.points[i]) == doctest::Approx(r0));
    for (int i = 4; i < 16; ++i) CHECK(std::abs(c.points[i]) == doctest::Approx(2.57 * r0));
    CHECK(std::arg(c.points[0]) == doctest::Approx(kPi / 4));

    ApskLayout bad = layout;
    bad.ring_radius_ratios = {1.0, 0.5};
    CHECK_THROWS_AS(build_apsk(bad), InvalidArgument);
    CHECK_THROWS_AS(constellation_by_name("8psk-ish"), InvalidArgument);
}

TEST_CASE("map_bits places each label on its point") {
    for (const char* name : kNames) {
        const auto c = constellation_by_name(name);
        const unsigned m = c.bits_per_symbol();
        for (std::size_t i = 0; i < c.order(); ++i) {
            const auto s = map_bits(label_bits(c.labels[i], m), c);
            REQUIRE(s.size() == 1u);
            CHECK(std::abs(s[0] - c.points[i]) < 1e-15);
        }
    }
    CHECK_THROWS_AS(map_bits(Bits{1, 0, 1}, build_qam(4)), InvalidArgument);
}

TEST_CASE("max-log llrs equal an exhaustive minimization over all labels") {
    Rng rng(21);
    for (const char* name : kNames) {
        const auto c = constellation_by_name(name);
        const unsigned m = c.bits_per_symbol();
        // the oracle rebuilds every point from its label through map_bits
        std::vector<cplx> pt(c.order());
        for (unsigned l = 0; l < c.order(); ++l) pt[l] = map_bits(label_bits(l, m), c)[0];
        CVec y(40);
        for (auto& v : y) v = rng.complex_normal(1.5);
        const double nv = 0.37;
        const auto llr = demap_llr(y, c, nv);
        REQUIRE(llr.size() == y.size() * m);
        for (std::size_t s = 0; s < y.size(); ++s)
            for (unsigned b = 0; b < m; ++b) {
                double d0 = std::numeric_limits<double>::infinity(), d1 = d0;
                for (unsigned l = 0; l < c.order(); ++l) {
                    const double d = std::norm(y[s] - pt[l]);
                    if (label_bits(l, m)[b])
                        d1 = std::min(d1, d);
                    else
                        d0 = std::min(d0, d);
                }
                CHECK(llr[s * m + b] == doctest::Approx((d1 - d0) / nv).epsilon(1e-12));
            }
    }
}

TEST_CASE("qpsk llr at a fixed point") {
    const auto c = build_qam(4);
    const CVec y{cplx{0.3, 0.1}};
    const auto llr = demap_llr(y, c, 1.0);
    // exhaustive two-point minimization per bit
    const auto p = map_bits(Bits{0, 0, 0, 1, 1, 0, 1, 1}, c);
    auto d = [&](int i) { return std::norm(y[0] - p[i]); };
    CHECK(llr[0] == doctest::Approx(std::min(d(2), d(3)) - std::min(d(0), d(1))));
    CHECK(llr[1] == doctest::Approx(std::min(d(1), d(3)) - std::min(d(0), d(2))));
}

TEST_CASE("hard decisions recover mapped bits without noise") {
    Rng rng(4);
    for (const char* name : kNames) {
        const auto c = constellation_by_name(name);
        const auto bits = rng.bits(c.bits_per_symbol() * 500);
        const auto sym = map_bits(bits, c);
        CHECK(hard_decision(demap_llr(sym, c, 0.1)) == bits);
    }
}

TEST_CASE("demapper rejects non-positive noise variance") {
    const CVec y{cplx{0, 0}};
    CHECK_THROWS_AS(demap_llr(y, build_qam(4), 0.0), InvalidArgument);
}

TEST_CASE("constellation csv lists every point") {
    const auto csv = constellation_csv(build_qam(4));
    CHECK(csv.rfind("index,re,im,label\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}
