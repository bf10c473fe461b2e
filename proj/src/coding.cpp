#include "subthz/coding.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <limits>

namespace subthz::coding {

std::string to_string(CodeRate r) { return r == CodeRate::Half ? "1/2" : "3/4"; }

CodeRate parse_code_rate(const std::string& text) {
    if (text == "1/2" || text == "0.5") return CodeRate::Half;
    if (text == "3/4" || text == "0.75") return CodeRate::ThreeQuarters;
    throw InvalidArgument("code rate '" + text + "' not supported (allowed: {1/2, 3/4})");
}

void ConvCode::validate() const {
    require(constraint_length >= 2 && constraint_length <= 16, "ConvCode: constraint length must lie in [2, 16]");
    const unsigned limit = 1u << constraint_length;
    require(g0 > 0 && g0 < limit && g1 > 0 && g1 < limit, "ConvCode: generators must fit the constraint length");
}

namespace {

// Which of the two mother-code outputs survive at trellis step i.
inline bool keep(const ConvCode& code, std::size_t i, int which) {
    if (code.rate == CodeRate::Half) return true;
    switch (i % 3) {
        case 0: return true;
        case 1: return which == 0;
        default: return which == 1;
    }
}

inline unsigned parity(unsigned v) { return static_cast<unsigned>(std::popcount(v) & 1); }

}  // namespace

std::size_t coded_length(std::size_t n_info, const ConvCode& code) {
    code.validate();
    const std::size_t steps = n_info + static_cast<std::size_t>(code.constraint_length - 1);
    if (code.rate == CodeRate::Half) return 2 * steps;
    // 2 + 1 + 1 outputs per three steps.
    return steps / 3 * 4 + (steps % 3 == 0 ? 0 : steps % 3 == 1 ? 2 : 3);
}

std::size_t max_info_bits(std::size_t capacity, const ConvCode& code) {
    std::size_t lo = 0, hi = capacity;
    if (coded_length(0, code) > capacity) return 0;
    while (lo < hi) {
        const std::size_t mid = (lo + hi + 1) / 2;
        if (coded_length(mid, code) <= capacity) lo = mid;
        else hi = mid - 1;
    }
    return lo;
}

Bits conv_encode(std::span<const std::uint8_t> bits, const ConvCode& code) {
    code.validate();
    const int k = code.constraint_length;
    Bits out;
    out.reserve(coded_length(bits.size(), code));
    unsigned state = 0;
    const std::size_t steps = bits.size() + static_cast<std::size_t>(k - 1);
    for (std::size_t i = 0; i < steps; ++i) {
        const unsigned b = i < bits.size() ? bits[i] : 0u;
        require(b <= 1, "conv_encode: input must be binary");
        const unsigned reg = (b << (k - 1)) | state;
        if (keep(code, i, 0)) out.push_back(static_cast<std::uint8_t>(parity(reg & code.g0)));
        if (keep(code, i, 1)) out.push_back(static_cast<std::uint8_t>(parity(reg & code.g1)));
        state = reg >> 1;
    }
    return out;
}

Bits viterbi_decode(std::span<const double> llrs, const ConvCode& code) {
    code.validate();
    const int k = code.constraint_length;
    const std::size_t tail = static_cast<std::size_t>(k - 1);
    // Recover the payload length from the codeword length.
    std::size_t steps = 0;
    {
        std::size_t n = 0;
        bool found = false;
        for (; coded_length(n, code) <= llrs.size(); ++n) {
            if (coded_length(n, code) == llrs.size()) {
                found = true;
                break;
            }
        }
        require(found, "viterbi_decode: LLR count does not match any terminated codeword length");
        steps = n + tail;
    }
    const std::size_t n_states = std::size_t{1} << (k - 1);
    constexpr double kNeg = -std::numeric_limits<double>::infinity();
    std::vector<double> metric(n_states, kNeg), next(n_states);
    metric[0] = 0.0;
    // pred_bit[i * n_states + s]: lowest bit of the surviving predecessor of state s at step i.
    std::vector<std::uint8_t> pred_bit(steps * n_states);

    std::vector<std::array<unsigned, 2>> outputs(2 * n_states);
    for (unsigned s = 0; s < n_states; ++s)
        for (unsigned b = 0; b < 2; ++b) {
            const unsigned reg = (b << (k - 1)) | s;
            outputs[2 * s + b] = {parity(reg & code.g0), parity(reg & code.g1)};
        }

    std::size_t pos = 0;
    for (std::size_t i = 0; i < steps; ++i) {
        const bool k0 = keep(code, i, 0), k1 = keep(code, i, 1);
        const double l0 = k0 ? llrs[pos] : 0.0;
        const double l1 = k1 ? llrs[pos + (k0 ? 1 : 0)] : 0.0;
        pos += static_cast<std::size_t>(k0) + static_cast<std::size_t>(k1);
        std::fill(next.begin(), next.end(), kNeg);
        const unsigned max_b = i < steps - tail ? 1u : 0u;
        for (unsigned s = 0; s < n_states; ++s) {
            if (metric[s] == kNeg) continue;
            for (unsigned b = 0; b <= max_b; ++b) {
                const auto& c = outputs[2 * s + b];
                const double bm = (c[0] ? -l0 : l0) + (c[1] ? -l1 : l1);
                const unsigned ns = ((b << (k - 1)) | s) >> 1;
                const double m = metric[s] + bm;
                if (m > next[ns]) {
                    next[ns] = m;
                    // The predecessor differs from (ns << 1) only in its lowest bit.
                    pred_bit[i * n_states + ns] = static_cast<std::uint8_t>(s & 1u);
                }
            }
        }
        metric.swap(next);
    }

    Bits out(steps - tail);
    unsigned s = 0;
    for (std::size_t i = steps; i-- > 0;) {
        const unsigned b = s >> (k - 2);
        if (i < out.size()) out[i] = static_cast<std::uint8_t>(b);
        s = ((s << 1) & (static_cast<unsigned>(n_states) - 1)) | pred_bit[i * n_states + s];
    }
    return out;
}

}  // namespace subthz::coding
