#pragma once

#include <string>
#include <vector>

#include "subthz/common.hpp"

namespace subthz::mapping {

/// Labeled unit-average-power point set.
///
/// `labels[i]` is the bit label of `points[i]`, stored as an integer whose
/// most significant of `bits_per_symbol()` bits is the first mapped bit.
struct ConstellationSpec {
    std::string name;
    CVec points;
    std::vector<unsigned> labels;

    std::size_t order() const noexcept { return points.size(); }
    unsigned bits_per_symbol() const noexcept;
    /// Inverse of `labels`: index of the point carrying a given label.
    std::vector<std::size_t> point_by_label() const;
    /// max |p|^2 / mean |p|^2 over the point set, in dB.
    double point_papr_db() const noexcept;
    double min_distance() const noexcept;

    /// Throws InvalidArgument when a structural invariant does not hold.
    void validate() const;
};

/// Concentric-ring layout. Radii are relative (innermost ring = 1); phase offsets in radians.
struct ApskLayout {
    std::vector<unsigned> ring_sizes;
    std::vector<double> ring_radius_ratios;
    std::vector<double> ring_phase_offsets;
};

ConstellationSpec build_qam(unsigned order);

/// Points are enumerated ring by ring (inner first) and by increasing angle
/// inside a ring; the n-th point gets the reflected Gray code of n. Adjacent
/// points on a ring and the hand-over between rings therefore differ in one bit.
ConstellationSpec build_apsk(const ApskLayout& layout);

/// 4+12 rings, ratio 2.57, inner offset pi/4.
ApskLayout default_apsk16_layout();
/// 4+12+20+28 rings, ratios 1/2.4/4.3/7.0 (the DVB-S2X 64-APSK geometry).
ApskLayout default_apsk64_layout();

/// Resolves names such as "qpsk", "16qam", "64qam", "16apsk", "64apsk".
ConstellationSpec constellation_by_name(const std::string& name);

CVec map_bits(std::span<const std::uint8_t> bits, const ConstellationSpec& spec);

/// Max-log LLRs, positive means bit 0 is more likely.
RVec demap_llr(std::span<const cplx> symbols, const ConstellationSpec& spec, double noise_var);

/// Same as demap_llr with a per-symbol noise variance.
RVec demap_llr(std::span<const cplx> symbols, const ConstellationSpec& spec,
               std::span<const double> noise_var);

Bits hard_decision(std::span<const double> llrs);

/// CSV with header `index,re,im,label`; labels written as bit strings.
std::string constellation_csv(const ConstellationSpec& spec);

}  // namespace subthz::mapping
