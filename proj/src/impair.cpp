#include "subthz/impair.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fft.hpp"
#include "subthz/sigcore.hpp"

namespace subthz::impair {

void PaModel::validate() const {
    require(gain > 0.0 && a_sat > 0.0 && smoothness > 0.0, "PaModel: gain, a_sat and smoothness must be positive");
    if (am_pm) require(am_pm->beta > 0.0 && am_pm->q > 0.0, "PaModel: AM/PM beta and q must be positive");
}

double PaModel::am_am(double a) const noexcept {
    const double ga = gain * a;
    const double r = ga / a_sat;
    const double two_p = 2.0 * smoothness;
    // Far into saturation r^2p overflows while the output is a_sat to double precision.
    if (r > 1e8) return a_sat;
    return ga / std::pow(1.0 + std::pow(r, two_p), 1.0 / two_p);
}

double PaModel::am_pm_rad(double a) const noexcept {
    if (!am_pm) return 0.0;
    const auto& c = *am_pm;
    return c.alpha * std::pow(a, c.q) / (1.0 + std::pow(a / c.beta, c.q));
}

CVec pa_apply(std::span<const cplx> x, const PaModel& model) {
    model.validate();
    CVec y(x.size());
    for (std::size_t n = 0; n < x.size(); ++n) {
        const double a = std::abs(x[n]);
        if (a == 0.0) {
            y[n] = 0.0;
            continue;
        }
        const double out = model.am_am(a);
        const cplx unit = x[n] / a;
        y[n] = model.am_pm ? out * unit * std::polar(1.0, model.am_pm_rad(a)) : out * unit;
    }
    return y;
}

ComplexSignal pa_apply(const ComplexSignal& x, const PaModel& model) {
    return {pa_apply(x.view(), model), x.sample_rate_hz()};
}

namespace {

double opbo_at_scale(std::span<const double> amps, const PaModel& m, double scale) {
    double acc = 0.0;
    for (double a : amps) {
        const double o = m.am_am(a * scale);
        acc += o * o;
    }
    const double p = acc / static_cast<double>(amps.size());
    return p > 0.0 ? 10.0 * std::log10(m.saturated_power() / p) : std::numeric_limits<double>::infinity();
}

}  // namespace

double opbo_db(std::span<const cplx> x, const PaModel& model) {
    require(!x.empty(), "opbo_db: empty signal");
    model.validate();
    RVec amps(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) amps[i] = std::abs(x[i]);
    return opbo_at_scale(amps, model, 1.0);
}

double opbo_scale(std::span<const cplx> x, const PaModel& model, double target) {
    model.validate();
    require(!x.empty(), "set_opbo: empty signal");
    require(target >= 0.0 && std::isfinite(target), "set_opbo: target OPBO must be >= 0 dB");
    RVec amps(x.size());
    double p_in = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        amps[i] = std::abs(x[i]);
        p_in += amps[i] * amps[i];
    }
    p_in /= static_cast<double>(x.size());
    require(p_in > 0.0, "set_opbo: signal has zero power");

    // Start from the scale giving the target in the linear regime, then bracket.
    double lo = std::sqrt(model.saturated_power() / (model.gain * model.gain * p_in)) * std::pow(10.0, -target / 20.0);
    double hi = lo;
    while (opbo_at_scale(amps, model, lo) < target) lo *= 0.5;
    int grow = 0;
    while (opbo_at_scale(amps, model, hi) > target) {
        hi *= 2.0;
        if (++grow > 60) {
            const double bound = opbo_at_scale(amps, model, hi);
            throw UnreachableOpbo("set_opbo: target " + format_fixed(target, 3) +
                                      " dB is below the smallest reachable backoff " + format_fixed(bound, 3) + " dB",
                                  bound);
        }
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = std::sqrt(lo * hi);
        const double f = opbo_at_scale(amps, model, mid);
        if (std::abs(f - target) < 1e-4) return mid;
        (f > target ? lo : hi) = mid;
    }
    return std::sqrt(lo * hi);
}

OpboResult set_opbo(const ComplexSignal& x, const PaModel& model, double target) {
    const double s = opbo_scale(x.view(), model, target);
    CVec y(x.samples());
    for (auto& v : y) v *= s;
    const double achieved = opbo_db(y, model);
    if (std::abs(achieved - target) > 0.01)
        throw UnreachableOpbo("set_opbo: target " + format_fixed(target, 3) + " dB not reachable (closest " +
                                  format_fixed(achieved, 3) + " dB)",
                              achieved);
    return {ComplexSignal(std::move(y), x.sample_rate_hz()), s, achieved};
}

// ---------------------------------------------------------------------------

void PnPsdSpec::validate() const {
    for (std::size_t i = 0; i < breakpoints.size(); ++i) {
        require(breakpoints[i].first > 0.0 && std::isfinite(breakpoints[i].first),
                "PnPsdSpec: breakpoint offsets must be positive");
        require(std::isfinite(breakpoints[i].second), "PnPsdSpec: breakpoint levels must be finite");
        if (i > 0)
            require(breakpoints[i].first > breakpoints[i - 1].first,
                    "PnPsdSpec: breakpoint offsets must be strictly increasing");
    }
    require(std::isfinite(floor_dbc_hz), "PnPsdSpec: floor must be finite (use -300 for a silent oscillator)");
    require(carrier_hz > 0.0, "PnPsdSpec: carrier must be positive");
}

double pn_level_dbc_hz(const PnPsdSpec& spec, double f) {
    const auto& bp = spec.breakpoints;
    if (bp.empty()) return spec.floor_dbc_hz;
    double level;
    if (f <= bp.front().first) {
        level = bp.front().second;
    } else {
        std::size_t i = 1;
        while (i + 1 < bp.size() && bp[i].first < f) ++i;
        if (bp.size() == 1) {
            level = bp.front().second;
        } else {
            // Segment i-1 .. i; beyond the last breakpoint the last slope continues.
            const double x0 = std::log10(bp[i - 1].first), x1 = std::log10(bp[i].first);
            const double slope = (bp[i].second - bp[i - 1].second) / (x1 - x0);
            level = bp[i - 1].second + slope * (std::log10(f) - x0);
        }
    }
    return std::max(level, spec.floor_dbc_hz);
}

PnPsdSpec default_pn_spec(double carrier_hz) {
    PnPsdSpec s;
    s.breakpoints = {{1e4, -50.0}, {1e5, -80.0}};
    s.floor_dbc_hz = -145.0 + 20.0 * std::log10(carrier_hz / 10e9);
    s.carrier_hz = carrier_hz;
    return s;
}

RVec pn_generate(const PnPsdSpec& spec, double fs_hz, std::size_t n, std::uint64_t seed) {
    spec.validate();
    require(n >= 2, "pn_generate: at least two samples are required");
    require(fs_hz > 0.0, "pn_generate: sample rate must be positive");
    Rng rng(seed);
    const double df = fs_hz / static_cast<double>(n);
    CVec spec_bins(n, cplx{0.0, 0.0});
    // phi[n] = sum_k Z_k e^{j2pi kn/N} with Z_{-k} = conj(Z_k): each positive bin
    // carries half of S_phi(f) df in each of the two conjugate terms.
    for (std::size_t k = 1; k <= n / 2; ++k) {
        const double f = static_cast<double>(k) * df;
        const double s_phi = 2.0 * std::pow(10.0, pn_level_dbc_hz(spec, f) / 10.0);
        if (2 * k == n) {
            spec_bins[k] = std::sqrt(s_phi * df) * rng.normal();
        } else {
            const cplx z = rng.complex_normal(s_phi * df / 2.0);
            spec_bins[k] = z;
            spec_bins[n - k] = std::conj(z);
        }
    }
    CVec t(n);
    detail::fft_raw(spec_bins, t, +1);
    RVec phi(n);
    for (std::size_t i = 0; i < n; ++i) phi[i] = t[i].real();
    return phi;
}

std::optional<std::string> pn_truncation_warning(const PnPsdSpec& spec, double fs_hz) {
    if (!spec.breakpoints.empty() && spec.breakpoints.back().first > fs_hz / 2.0)
        return "phase-noise PSD extends beyond fs/2 = " + format_double(fs_hz / 2.0) + " Hz and is truncated";
    return std::nullopt;
}

void pn_apply_inplace(std::span<cplx> x, std::span<const double> phase) {
    require(x.size() == phase.size(), "pn_apply: signal and phase lengths differ");
    for (std::size_t i = 0; i < x.size(); ++i) x[i] *= std::polar(1.0, phase[i]);
}

ComplexSignal pn_apply(const ComplexSignal& x, std::span<const double> phase) {
    CVec y(x.samples());
    pn_apply_inplace(y, phase);
    return {std::move(y), x.sample_rate_hz()};
}

// ---------------------------------------------------------------------------

void add_noise(std::span<cplx> x, double noise_var, Rng& rng) {
    require(noise_var >= 0.0 && std::isfinite(noise_var), "add_noise: variance must be finite and non-negative");
    for (auto& v : x) v += rng.complex_normal(noise_var);
}

ComplexSignal awgn(const ComplexSignal& x, double snr_db, std::uint64_t seed) {
    require(std::isfinite(snr_db), "awgn: SNR must be finite");
    Rng rng(seed);
    CVec y(x.samples());
    add_noise(y, x.mean_power() * std::pow(10.0, -snr_db / 10.0), rng);
    return {std::move(y), x.sample_rate_hz()};
}

ComplexSignal tdl_channel(const ComplexSignal& x, std::span<const cplx> taps) {
    require(!taps.empty(), "tdl_channel: no taps");
    const auto& s = x.samples();
    CVec y(s.size() + taps.size() - 1, cplx{0.0, 0.0});
    for (std::size_t n = 0; n < s.size(); ++n)
        for (std::size_t i = 0; i < taps.size(); ++i) y[n + i] += s[n] * taps[i];
    return {std::move(y), x.sample_rate_hz()};
}

CVec tdl_realize(const TdlProfile& profile, std::uint64_t seed) {
    require(!profile.tap_powers.empty(), "tdl_realize: empty profile");
    Rng rng(seed);
    CVec taps;
    for (double p : profile.tap_powers) {
        require(p >= 0.0, "tdl_realize: tap powers must be non-negative");
        taps.push_back(rng.complex_normal(p));
    }
    return taps;
}

ComplexSignal tdl_channel(const ComplexSignal& x, const TdlProfile& profile, std::uint64_t seed) {
    const CVec taps = tdl_realize(profile, seed);
    return tdl_channel(x, taps);
}

// ---------------------------------------------------------------------------

void QuantizerSpec::validate() const {
    require(bits >= 1 && bits <= 30, "QuantizerSpec: bits must lie in [1, 30]");
    require(oversample_factor >= 1, "QuantizerSpec: oversample_factor must be >= 1");
    if (full_scale) require(*full_scale > 0.0 && std::isfinite(*full_scale), "QuantizerSpec: full_scale must be positive");
    else require(clip_probability > 0.0 && clip_probability < 1.0, "QuantizerSpec: clip probability must lie in (0, 1)");
}

double resolve_full_scale(std::span<const cplx> x, const QuantizerSpec& spec) {
    spec.validate();
    if (spec.full_scale) return *spec.full_scale;
    RVec rails;
    rails.reserve(2 * x.size());
    for (const auto& v : x) {
        rails.push_back(std::abs(v.real()));
        rails.push_back(std::abs(v.imag()));
    }
    const auto n = rails.size();
    const auto k = std::min(n - 1, static_cast<std::size_t>(std::floor((1.0 - spec.clip_probability) * static_cast<double>(n))));
    std::nth_element(rails.begin(), rails.begin() + static_cast<long>(k), rails.end());
    const double fs = rails[k];
    require(fs > 0.0, "quantize: cannot derive a full scale from an all-zero signal");
    return fs;
}

ComplexSignal quantize(const ComplexSignal& x, const QuantizerSpec& spec) {
    spec.validate();
    CVec in = spec.oversample_factor > 1 ? sigcore::upsample_bandlimited(x.view(), spec.oversample_factor) : x.samples();
    const double fs = resolve_full_scale(in, spec);
    const double levels = std::ldexp(1.0, spec.bits);
    const double step = 2.0 * fs / levels;
    const double top = fs - step / 2.0;
    auto q = [&](double v) { return std::clamp(step * (std::floor(v / step) + 0.5), -top, top); };
    for (auto& v : in) v = {q(v.real()), q(v.imag())};
    return {std::move(in), x.sample_rate_hz() * spec.oversample_factor};
}

}  // namespace subthz::impair
