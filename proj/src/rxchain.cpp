#include "subthz/rxchain.hpp"

#include <cmath>
#include <limits>

namespace subthz::rxchain {

std::string to_string(EqualizerMode m) { return m == EqualizerMode::ZeroForcing ? "zf" : "mmse"; }

EqualizerMode parse_equalizer(const std::string& name) {
    if (name == "zf") return EqualizerMode::ZeroForcing;
    if (name == "mmse") return EqualizerMode::Mmse;
    throw InvalidArgument("unknown equalizer '" + name + "' (expected zf or mmse)");
}

CVec fde_equalize(std::span<const cplx> y, std::span<const cplx> h, EqualizerMode mode, double noise_var) {
    require(y.size() == h.size(), "fde_equalize: Y and H lengths differ");
    require(noise_var >= 0.0 && std::isfinite(noise_var), "fde_equalize: noise variance must be non-negative");
    CVec out(y.size());
    for (std::size_t k = 0; k < y.size(); ++k) {
        if (mode == EqualizerMode::ZeroForcing) {
            if (h[k] == cplx{0.0, 0.0})
                throw InvalidArgument("fde_equalize: zero-forcing on a zero channel bin (" + std::to_string(k) + ")");
            out[k] = y[k] / h[k];
        } else {
            const double d = std::norm(h[k]) + noise_var;
            out[k] = d > 0.0 ? std::conj(h[k]) * y[k] / d : cplx{0.0, 0.0};
        }
    }
    return out;
}

CpeResult cpe_compensate(std::span<const cplx> block, std::span<const std::size_t> pos, std::span<const cplx> refs) {
    require(!pos.empty(), "cpe_compensate: empty pilot set");
    require(pos.size() == refs.size(), "cpe_compensate: pilot positions and references differ in length");
    cplx acc{0.0, 0.0};
    for (std::size_t i = 0; i < pos.size(); ++i) {
        require(pos[i] < block.size(), "cpe_compensate: pilot position outside the block");
        require(std::abs(std::abs(refs[i]) - 1.0) < 1e-9, "cpe_compensate: pilot references must be unit-modulus");
        acc += block[pos[i]] * std::conj(refs[i]);
    }
    const double phi = std::arg(acc);
    const cplx rot = std::polar(1.0, -phi);
    CVec out(block.begin(), block.end());
    for (auto& v : out) v *= rot;
    return {std::move(out), phi};
}

Bits cpm_detect(std::span<const cplx> r, const waveform::CpmSpec& spec) {
    spec.validate();
    const int per = spec.output_per_symbol();
    require(!r.empty() && r.size() % static_cast<std::size_t>(per) == 0,
            "cpm_detect: sample count must be a multiple of the samples per symbol");
    const std::size_t n = r.size() / static_cast<std::size_t>(per);
    const int n_states = spec.phase_states();
    const long period = n_states;
    const double step = kPi * spec.h();

    // Expected samples for (state, bit).
    std::vector<CVec> branch(static_cast<std::size_t>(2 * n_states));
    for (int s = 0; s < n_states; ++s)
        for (int b = 0; b < 2; ++b) {
            const int a = b ? 1 : -1;
            const double theta = kPi * s / spec.h_den;
            auto& e = branch[static_cast<std::size_t>(2 * s + b)];
            for (int j = spec.subsample_factor; j <= spec.samples_per_symbol; j += spec.subsample_factor)
                e.push_back(std::polar(1.0, theta + a * step * j / spec.samples_per_symbol));
        }

    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> cost(static_cast<std::size_t>(n_states), kInf), next(cost.size());
    cost[0] = 0.0;
    std::vector<int> from(n * static_cast<std::size_t>(n_states));
    std::vector<std::uint8_t> bit(from.size());
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(next.begin(), next.end(), kInf);
        const cplx* obs = r.data() + i * static_cast<std::size_t>(per);
        for (int s = 0; s < n_states; ++s) {
            if (cost[static_cast<std::size_t>(s)] == kInf) continue;
            for (int b = 0; b < 2; ++b) {
                const auto& e = branch[static_cast<std::size_t>(2 * s + b)];
                double d = 0.0;
                for (int j = 0; j < per; ++j) d += std::norm(obs[j] - e[static_cast<std::size_t>(j)]);
                const long ns = ((s + (b ? 1 : -1) * static_cast<long>(spec.h_num)) % period + period) % period;
                const double c = cost[static_cast<std::size_t>(s)] + d;
                const std::size_t idx = i * static_cast<std::size_t>(n_states) + static_cast<std::size_t>(ns);
                if (c < next[static_cast<std::size_t>(ns)]) {
                    next[static_cast<std::size_t>(ns)] = c;
                    from[idx] = s;
                    bit[idx] = static_cast<std::uint8_t>(b);
                }
            }
        }
        cost.swap(next);
    }
    int s = 0;
    for (int k = 1; k < n_states; ++k)
        if (cost[static_cast<std::size_t>(k)] < cost[static_cast<std::size_t>(s)]) s = k;
    Bits out(n);
    for (std::size_t i = n; i-- > 0;) {
        const std::size_t idx = i * static_cast<std::size_t>(n_states) + static_cast<std::size_t>(s);
        out[i] = bit[idx];
        s = from[idx];
    }
    return out;
}

}  // namespace subthz::rxchain
