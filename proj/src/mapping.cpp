#include "subthz/mapping.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace subthz::mapping {
namespace {

unsigned gray(unsigned n) { return n ^ (n >> 1); }

void normalize_power(CVec& pts) {
    double p = 0.0;
    for (const auto& v : pts) p += std::norm(v);
    const double s = 1.0 / std::sqrt(p / static_cast<double>(pts.size()));
    for (auto& v : pts) v *= s;
}

}  // namespace

unsigned ConstellationSpec::bits_per_symbol() const noexcept {
    return static_cast<unsigned>(std::countr_zero(points.size()));
}

std::vector<std::size_t> ConstellationSpec::point_by_label() const {
    std::vector<std::size_t> inv(order());
    for (std::size_t i = 0; i < labels.size(); ++i) inv[labels[i]] = i;
    return inv;
}

double ConstellationSpec::point_papr_db() const noexcept {
    double peak = 0.0, sum = 0.0;
    for (const auto& p : points) {
        peak = std::max(peak, std::norm(p));
        sum += std::norm(p);
    }
    return 10.0 * std::log10(peak / (sum / static_cast<double>(points.size())));
}

double ConstellationSpec::min_distance() const noexcept {
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = i + 1; j < points.size(); ++j) d = std::min(d, std::abs(points[i] - points[j]));
    return d;
}

void ConstellationSpec::validate() const {
    const std::size_t m = points.size();
    require(m >= 2 && std::has_single_bit(m), name + ": order must be a power of two");
    require(labels.size() == m, name + ": one label per point is required");
    std::set<unsigned> seen(labels.begin(), labels.end());
    require(seen.size() == m && *seen.rbegin() < m, name + ": labels must be a permutation");
    double p = 0.0;
    for (const auto& v : points) p += std::norm(v);
    require(std::abs(p / static_cast<double>(m) - 1.0) < 1e-12, name + ": mean power must be 1");
    require(min_distance() > 1e-12, name + ": points must be distinct");
}

ConstellationSpec build_qam(unsigned order) {
    require(order == 4 || order == 16 || order == 64, "build_qam: order must be 4, 16 or 64");
    const unsigned bits = static_cast<unsigned>(std::countr_zero(order));
    const unsigned half = bits / 2;
    const unsigned side = 1U << half;
    ConstellationSpec c;
    c.name = order == 4 ? "qpsk" : std::to_string(order) + "qam";
    for (unsigned i = 0; i < side; ++i) {
        for (unsigned q = 0; q < side; ++q) {
            const double re = 2.0 * i - (side - 1.0);
            const double im = 2.0 * q - (side - 1.0);
            c.points.emplace_back(re, im);
            c.labels.push_back((gray(i) << half) | gray(q));
        }
    }
    normalize_power(c.points);
    return c;
}

ConstellationSpec build_apsk(const ApskLayout& layout) {
    const auto& sizes = layout.ring_sizes;
    require(!sizes.empty(), "build_apsk: at least one ring is required");
    require(layout.ring_radius_ratios.size() == sizes.size() && layout.ring_phase_offsets.size() == sizes.size(),
            "build_apsk: ring sizes, ratios and offsets must have equal length");
    unsigned total = 0;
    for (std::size_t r = 0; r < sizes.size(); ++r) {
        require(sizes[r] > 0, "build_apsk: ring sizes must be positive");
        require(layout.ring_radius_ratios[r] > 0.0, "build_apsk: ring radii must be positive");
        if (r > 0)
            require(layout.ring_radius_ratios[r] > layout.ring_radius_ratios[r - 1],
                    "build_apsk: ring radius ratios must be strictly increasing");
        total += sizes[r];
    }
    require(total >= 2 && std::has_single_bit(total), "build_apsk: ring sizes must sum to a power of two");

    ConstellationSpec c;
    c.name = std::to_string(total) + "apsk";
    unsigned n = 0;
    for (std::size_t r = 0; r < sizes.size(); ++r) {
        for (unsigned k = 0; k < sizes[r]; ++k) {
            const double phi = layout.ring_phase_offsets[r] + 2.0 * kPi * k / sizes[r];
            c.points.push_back(std::polar(layout.ring_radius_ratios[r], phi));
            c.labels.push_back(gray(n++));
        }
    }
    normalize_power(c.points);
    return c;
}

ApskLayout default_apsk16_layout() {
    return {{4, 12}, {1.0, 2.57}, {kPi / 4.0, kPi / 12.0}};
}

ApskLayout default_apsk64_layout() {
    return {{4, 12, 20, 28}, {1.0, 2.4, 4.3, 7.0}, {kPi / 4.0, kPi / 12.0, kPi / 20.0, kPi / 28.0}};
}

ConstellationSpec constellation_by_name(const std::string& name) {
    if (name == "qpsk" || name == "4qam") return build_qam(4);
    if (name == "16qam") return build_qam(16);
    if (name == "64qam") return build_qam(64);
    if (name == "16apsk") return build_apsk(default_apsk16_layout());
    if (name == "64apsk") return build_apsk(default_apsk64_layout());
    throw InvalidArgument("unknown constellation '" + name + "' (expected qpsk, 16qam, 64qam, 16apsk, 64apsk)");
}

CVec map_bits(std::span<const std::uint8_t> bits, const ConstellationSpec& spec) {
    const unsigned m = spec.bits_per_symbol();
    require(bits.size() % m == 0, "map_bits: bit count must be a multiple of log2(order)");
    const auto inv = spec.point_by_label();
    CVec out(bits.size() / m);
    for (std::size_t s = 0; s < out.size(); ++s) {
        unsigned label = 0;
        for (unsigned b = 0; b < m; ++b) label = (label << 1) | (bits[s * m + b] & 1U);
        out[s] = spec.points[inv[label]];
    }
    return out;
}

RVec demap_llr(std::span<const cplx> symbols, const ConstellationSpec& spec, double noise_var) {
    require(noise_var > 0.0, "demap_llr: noise variance must be positive");
    const std::vector<double> nv(symbols.size(), noise_var);
    return demap_llr(symbols, spec, nv);
}

RVec demap_llr(std::span<const cplx> symbols, const ConstellationSpec& spec, std::span<const double> noise_var) {
    require(noise_var.size() == symbols.size(), "demap_llr: one noise variance per symbol is required");
    const unsigned m = spec.bits_per_symbol();
    const std::size_t order = spec.order();
    RVec llr(symbols.size() * m);
    std::vector<double> d(order);
    constexpr double inf = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < symbols.size(); ++s) {
        require(noise_var[s] > 0.0, "demap_llr: noise variance must be positive");
        for (std::size_t i = 0; i < order; ++i) d[i] = std::norm(symbols[s] - spec.points[i]);
        for (unsigned b = 0; b < m; ++b) {
            const unsigned mask = 1U << (m - 1 - b);
            double d0 = inf, d1 = inf;
            for (std::size_t i = 0; i < order; ++i) {
                if (spec.labels[i] & mask)
                    d1 = std::min(d1, d[i]);
                else
                    d0 = std::min(d0, d[i]);
            }
            llr[s * m + b] = (d1 - d0) / noise_var[s];
        }
    }
    return llr;
}

Bits hard_decision(std::span<const double> llrs) {
    Bits out(llrs.size());
    for (std::size_t i = 0; i < llrs.size(); ++i) out[i] = llrs[i] < 0.0 ? 1 : 0;
    return out;
}

std::string constellation_csv(const ConstellationSpec& spec) {
    std::ostringstream os;
    os << "index,re,im,label\n";
    const unsigned m = spec.bits_per_symbol();
    for (std::size_t i = 0; i < spec.order(); ++i) {
        os << i << ',' << format_double(spec.points[i].real()) << ',' << format_double(spec.points[i].imag()) << ',';
        for (unsigned b = 0; b < m; ++b) os << ((spec.labels[i] >> (m - 1 - b)) & 1U);
        os << '\n';
    }
    return os.str();
}

}  // namespace subthz::mapping
