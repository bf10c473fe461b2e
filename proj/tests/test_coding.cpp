#include <cmath>
#include <limits>

#include "doctest.h"
#include "subthz/coding.hpp"

using namespace subthz;
using namespace subthz::coding;

namespace {

double correlation(const Bits& code, std::span<const double> llr) {
    double m = 0.0;
    for (std::size_t i = 0; i < code.size(); ++i) m += (code[i] ? -1.0 : 1.0) * llr[i];
    return m;
}

}  // namespace

TEST_CASE("code rate parsing") {
    CHECK(parse_code_rate("1/2") == CodeRate::Half);
    CHECK(parse_code_rate("3/4") == CodeRate::ThreeQuarters);
    CHECK_THROWS_AS(parse_code_rate("0.8"), InvalidArgument);
    CHECK_THROWS_AS(parse_code_rate("5/6"), InvalidArgument);
}

TEST_CASE("coded length and capacity") {
    ConvCode half;
    CHECK(coded_length(100, half) == 2 * (100 + 6));
    ConvCode tq{CodeRate::ThreeQuarters};
    for (std::size_t cap : {100u, 1000u, 4911u}) {
        for (const auto& c : {half, tq}) {
            const auto k = max_info_bits(cap, c);
            CHECK(coded_length(k, c) <= cap);
            CHECK(coded_length(k + 1, c) > cap);
        }
    }
    for (std::size_t k : {1u, 12u, 300u}) CHECK(conv_encode(Bits(k, 1), tq).size() == coded_length(k, tq));
}

TEST_CASE("noiseless encode then decode is the identity") {
    Rng rng(1);
    for (auto rate : {CodeRate::Half, CodeRate::ThreeQuarters}) {
        ConvCode c{rate};
        const auto info = rng.bits(500);
        const auto code = conv_encode(info, c);
        RVec llr(code.size());
        for (std::size_t i = 0; i < code.size(); ++i) llr[i] = code[i] ? -1.0 : 1.0;
        CHECK(viterbi_decode(llr, c) == info);
    }
}

TEST_CASE("viterbi equals brute-force maximum likelihood at payload length 12") {
    constexpr std::size_t k = 12;
    Rng rng(77);
    for (auto rate : {CodeRate::Half, CodeRate::ThreeQuarters}) {
        ConvCode c{rate};
        std::vector<Bits> book;
        for (unsigned m = 0; m < (1u << k); ++m) {
            Bits info(k);
            for (std::size_t i = 0; i < k; ++i) info[i] = (m >> (k - 1 - i)) & 1U;
            book.push_back(conv_encode(info, c));
        }
        for (int trial = 0; trial < 40; ++trial) {
            const auto& sent = book[rng.next_u64() % book.size()];
            RVec llr(sent.size());
            for (std::size_t i = 0; i < sent.size(); ++i) llr[i] = (sent[i] ? -1.0 : 1.0) + 1.2 * rng.normal();
            double best = -std::numeric_limits<double>::infinity();
            unsigned best_m = 0;
            for (unsigned m = 0; m < book.size(); ++m) {
                const double v = correlation(book[m], llr);
                if (v > best) {
                    best = v;
                    best_m = m;
                }
            }
            const auto dec = viterbi_decode(llr, c);
            REQUIRE(dec.size() == k);
            CHECK(correlation(conv_encode(dec, c), llr) == doctest::Approx(best).epsilon(1e-12));
            unsigned dm = 0;
            for (auto b : dec) dm = (dm << 1) | b;
            CHECK(dm == best_m);
        }
    }
}

TEST_CASE("decoder rejects a codeword of the wrong length") {
    ConvCode c;
    CHECK_THROWS_AS(viterbi_decode(RVec(13, 1.0), c), InvalidArgument);
}
