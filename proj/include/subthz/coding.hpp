#pragma once

#include <string>

#include "subthz/common.hpp"

namespace subthz::coding {

enum class CodeRate { Half, ThreeQuarters };

std::string to_string(CodeRate r);
/// Accepts "1/2" and "3/4".
CodeRate parse_code_rate(const std::string& text);

/// Terminated feedforward convolutional code, rate 1/2 mother code with
/// optional puncturing to 3/4 (keep both outputs, first only, second only, repeating).
struct ConvCode {
    CodeRate rate = CodeRate::Half;
    int constraint_length = 7;
    unsigned g0 = 0133;
    unsigned g1 = 0171;

    void validate() const;
};

/// Coded bits produced for n_info payload bits (tail included).
std::size_t coded_length(std::size_t n_info, const ConvCode& code);

/// Largest payload whose codeword fits into `capacity` coded bits.
std::size_t max_info_bits(std::size_t capacity, const ConvCode& code);

Bits conv_encode(std::span<const std::uint8_t> bits, const ConvCode& code);

/// Soft-input Viterbi decoding of a terminated codeword; LLR > 0 favours a 0 bit.
/// Maximizes sum (1 - 2c) * llr over all codewords.
Bits viterbi_decode(std::span<const double> llrs, const ConvCode& code);

}  // namespace subthz::coding
