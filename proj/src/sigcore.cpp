#include "subthz/sigcore.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include "fft.hpp"

namespace subthz::sigcore {

CVec dft(std::span<const cplx> x) {
    require(!x.empty(), "dft: empty input");
    CVec out(x.size());
    detail::fft_raw(x, out, -1);
    const double s = 1.0 / std::sqrt(static_cast<double>(x.size()));
    for (auto& v : out) v *= s;
    return out;
}

CVec idft(std::span<const cplx> x) {
    require(!x.empty(), "idft: empty input");
    CVec out(x.size());
    detail::fft_raw(x, out, +1);
    const double s = 1.0 / std::sqrt(static_cast<double>(x.size()));
    for (auto& v : out) v *= s;
    return out;
}

ComplexSignal dft(const ComplexSignal& x) { return {dft(x.view()), x.sample_rate_hz()}; }
ComplexSignal idft(const ComplexSignal& x) { return {idft(x.view()), x.sample_rate_hz()}; }

// ---------------------------------------------------------------------------

void FilterSpec::validate() const {
    require(oversampling >= 1, "FilterSpec: oversampling must be >= 1");
    if (kind == FilterKind::RootRaisedCosine) {
        require(roll_off >= 0.0 && roll_off <= 1.0, "FilterSpec: roll-off must lie in [0, 1]");
        require(span_symbols > 0 && span_symbols % 2 == 0, "FilterSpec: span must be a positive even number");
        return;
    }
    require(!taps.empty() && taps.size() % 2 == 1, "FilterSpec: custom taps must have odd length");
    double e = 0.0;
    for (double t : taps) e += t * t;
    require(std::abs(e - 1.0) < 1e-12, "FilterSpec: custom taps must have unit energy");
}

double rrc_impulse(double t, double beta) {
    if (t == 0.0) return 1.0 - beta + 4.0 * beta / kPi;
    if (beta == 0.0) return std::sin(kPi * t) / (kPi * t);
    const double x = 4.0 * beta * t;
    if (std::abs(std::abs(x) - 1.0) < 1e-10) {
        // limit at t = +-1/(4 beta)
        const double a = kPi / (4.0 * beta);
        return beta / std::sqrt(2.0) * ((1.0 + 2.0 / kPi) * std::sin(a) + (1.0 - 2.0 / kPi) * std::cos(a));
    }
    const double num = std::sin(kPi * t * (1.0 - beta)) + x * std::cos(kPi * t * (1.0 + beta));
    return num / (kPi * t * (1.0 - x * x));
}

RVec rrc_taps(const FilterSpec& spec) {
    require(spec.kind == FilterKind::RootRaisedCosine, "rrc_taps: spec must be root-raised-cosine");
    spec.validate();
    const int len = spec.span_symbols * spec.oversampling + 1;
    const int c = (len - 1) / 2;
    RVec h(static_cast<std::size_t>(len));
    for (int n = 0; n < len; ++n)
        h[static_cast<std::size_t>(n)] = rrc_impulse(static_cast<double>(n - c) / spec.oversampling, spec.roll_off);
    // Enforce exact symmetry before normalizing.
    for (int n = 0; n < c; ++n) h[static_cast<std::size_t>(len - 1 - n)] = h[static_cast<std::size_t>(n)];
    double e = 0.0;
    for (double v : h) e += v * v;
    const double s = 1.0 / std::sqrt(e);
    for (double& v : h) v *= s;
    return h;
}

RVec filter_taps(const FilterSpec& spec) {
    spec.validate();
    return spec.kind == FilterKind::RootRaisedCosine ? rrc_taps(spec) : spec.taps;
}

CVec upsample_filter(std::span<const cplx> symbols, std::span<const double> taps, int factor) {
    require(factor >= 1, "upsample_filter: factor must be >= 1");
    require(!symbols.empty() && !taps.empty(), "upsample_filter: empty input");
    const std::size_t f = static_cast<std::size_t>(factor);
    const std::size_t len = (symbols.size() - 1) * f + taps.size();
    CVec y(len, cplx{0.0, 0.0});
    for (std::size_t k = 0; k < symbols.size(); ++k) {
        const cplx s = symbols[k];
        cplx* out = y.data() + k * f;
        for (std::size_t i = 0; i < taps.size(); ++i) out[i] += s * taps[i];
    }
    return y;
}

CVec convolve(std::span<const cplx> x, std::span<const double> taps) {
    return upsample_filter(x, taps, 1);
}

CVec upsample_bandlimited(std::span<const cplx> x, int factor) {
    require(factor >= 1, "upsample_bandlimited: factor must be >= 1");
    require(!x.empty(), "upsample_bandlimited: empty input");
    if (factor == 1) return CVec(x.begin(), x.end());
    const std::size_t n = x.size();
    const std::size_t m = n * static_cast<std::size_t>(factor);
    CVec spec(n);
    detail::fft_raw(x, spec, -1);
    CVec padded(m, cplx{0.0, 0.0});
    const std::size_t pos = (n + 1) / 2;  // bins 0..pos-1 are non-negative frequencies
    for (std::size_t k = 0; k < pos; ++k) padded[k] = spec[k];
    for (std::size_t k = n / 2 + 1; k < n; ++k) padded[m - n + k] = spec[k];
    if (n % 2 == 0) {
        padded[n / 2] = 0.5 * spec[n / 2];
        padded[m - n / 2] = 0.5 * spec[n / 2];
    }
    CVec y(m);
    detail::fft_raw(padded, y, +1);
    const double s = 1.0 / static_cast<double>(n);
    for (auto& v : y) v *= s;
    return y;
}

double occupied_bandwidth(std::span<const double> taps, int oversampling, double fraction) {
    require(!taps.empty() && oversampling >= 1, "occupied_bandwidth: invalid filter");
    require(fraction > 0.0 && fraction < 1.0, "occupied_bandwidth: fraction must lie in (0, 1)");
    const std::size_t nf = std::max<std::size_t>(16384, std::bit_ceil(taps.size() * 16));
    CVec buf(nf, cplx{0.0, 0.0});
    for (std::size_t i = 0; i < taps.size(); ++i) buf[i] = taps[i];
    CVec spec(nf);
    detail::fft_raw(buf, spec, -1);
    RVec p(nf);
    double total = 0.0;
    for (std::size_t k = 0; k < nf; ++k) total += (p[k] = std::norm(spec[k]));
    // Grow a symmetric band around DC bin by bin.
    double acc = p[0];
    std::size_t half = 0;
    while (acc < fraction * total && half < nf / 2) {
        ++half;
        acc += p[half];
        if (half != nf - half) acc += p[nf - half];
    }
    const double width_cycles = (2.0 * static_cast<double>(half) + 1.0) / static_cast<double>(nf);
    return width_cycles * oversampling;
}

// ---------------------------------------------------------------------------

double papr_db(std::span<const cplx> x) {
    require(!x.empty(), "papr_db: empty signal");
    double peak = 0.0, sum = 0.0;
    for (const auto& v : x) {
        const double p = std::norm(v);
        peak = std::max(peak, p);
        sum += p;
    }
    require(sum > 0.0, "papr_db: signal has zero average power");
    const double ratio = peak / (sum / static_cast<double>(x.size()));
    return std::max(0.0, 10.0 * std::log10(ratio));
}

double papr_db(const ComplexSignal& x) { return papr_db(x.view()); }

std::vector<CcdfPoint> ccdf(std::span<const double> papr_samples, std::span<const double> thresholds) {
    require(!papr_samples.empty(), "ccdf: empty sample set");
    std::vector<double> sorted(papr_samples.begin(), papr_samples.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<CcdfPoint> out;
    out.reserve(thresholds.size());
    const double n = static_cast<double>(sorted.size());
    for (double t : thresholds) {
        const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), t);
        out.push_back({t, static_cast<double>(above) / n});
    }
    return out;
}

double papr_at_ccdf(std::vector<double> samples, double probability) {
    require(!samples.empty(), "papr_at_ccdf: empty sample set");
    require(probability > 0.0 && probability < 1.0, "papr_at_ccdf: probability must lie in (0, 1)");
    std::sort(samples.begin(), samples.end());
    const auto n = samples.size();
    const auto allowed = static_cast<std::size_t>(std::floor(probability * static_cast<double>(n)));
    return samples[n - 1 - std::min(allowed, n - 1)];
}

std::vector<PsdBin> psd_estimate(const ComplexSignal& x, std::size_t segment_len) {
    require(segment_len >= 2 && std::has_single_bit(segment_len), "psd_estimate: segment length must be a power of two");
    require(segment_len <= x.size(), "psd_estimate: segment longer than the signal");
    const std::size_t hop = segment_len / 2;
    const std::size_t n_seg = (x.size() - segment_len) / hop + 1;
    RVec w(segment_len);
    double wpow = 0.0;
    for (std::size_t i = 0; i < segment_len; ++i) {
        w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(segment_len));
        wpow += w[i] * w[i];
    }
    RVec acc(segment_len, 0.0);
    CVec buf(segment_len), spec(segment_len);
    const auto& s = x.samples();
    for (std::size_t seg = 0; seg < n_seg; ++seg) {
        for (std::size_t i = 0; i < segment_len; ++i) buf[i] = s[seg * hop + i] * w[i];
        detail::fft_raw(buf, spec, -1);
        for (std::size_t k = 0; k < segment_len; ++k) acc[k] += std::norm(spec[k]);
    }
    const double fs = x.sample_rate_hz();
    const double scale = 1.0 / (static_cast<double>(n_seg) * fs * wpow);
    std::vector<PsdBin> out(segment_len);
    for (std::size_t i = 0; i < segment_len; ++i) {
        // shift so that out[0] is -fs/2
        const std::size_t k = (i + segment_len / 2) % segment_len;
        const double f = (static_cast<double>(i) - static_cast<double>(segment_len / 2)) * fs /
                         static_cast<double>(segment_len);
        out[i] = {f, acc[k] * scale};
    }
    return out;
}

// ---------------------------------------------------------------------------
// PAPR-aware filter design
// ---------------------------------------------------------------------------

namespace {

CVec random_symbols(const mapping::ConstellationSpec& c, std::size_t n, Rng& rng) {
    CVec s(n);
    for (auto& v : s) v = c.points[rng.next_u64() % c.order()];
    return s;
}

// Spectrum of the taps wrapped onto a circle of length m with the centre tap at index 0.
CVec circular_response(std::span<const double> taps, std::size_t m) {
    const std::size_t c = (taps.size() - 1) / 2;
    CVec buf(m, cplx{0.0, 0.0});
    for (std::size_t i = 0; i < taps.size(); ++i) buf[(i + m - c) % m] += taps[i];
    CVec spec(m);
    detail::fft_raw(buf, spec, -1);
    return spec;
}

// Spectra of zero-stuffed symbol blocks; circular shaping is then a per-bin product.
std::vector<CVec> block_spectra(std::span<const cplx> symbols, int os, std::size_t block_symbols) {
    const std::size_t m = block_symbols * static_cast<std::size_t>(os);
    const std::size_t nb = symbols.size() / block_symbols;
    std::vector<CVec> out(nb, CVec(m));
    CVec u(m);
    for (std::size_t b = 0; b < nb; ++b) {
        std::fill(u.begin(), u.end(), cplx{0.0, 0.0});
        for (std::size_t k = 0; k < block_symbols; ++k) u[k * static_cast<std::size_t>(os)] = symbols[b * block_symbols + k];
        detail::fft_raw(u, out[b], -1);
    }
    return out;
}

void shape_circular(const CVec& u_spec, const CVec& h_spec, CVec& work, CVec& y) {
    for (std::size_t k = 0; k < work.size(); ++k) work[k] = u_spec[k] * h_spec[k];
    detail::fft_raw(work, y, +1);
}

double papr_quantile(const std::vector<CVec>& spectra, std::span<const double> taps, double level) {
    const std::size_t m = spectra.front().size();
    const CVec h = circular_response(taps, m);
    CVec work(m), y(m);
    std::vector<double> papr;
    papr.reserve(spectra.size());
    for (const auto& u : spectra) {
        shape_circular(u, h, work, y);
        papr.push_back(papr_db(y));
    }
    return papr_at_ccdf(std::move(papr), level);
}

// Projects taps onto real, symmetric, unit-energy filters confined to |f| <= band/2 (cycles/sample).
RVec project_band(const RVec& h, double band_cycles) {
    const std::size_t len = h.size();
    const std::size_t c = (len - 1) / 2;
    const std::size_t nf = std::max<std::size_t>(4096, std::bit_ceil(len * 16));
    CVec spec = circular_response(h, nf);
    for (std::size_t k = 0; k < nf; ++k) {
        const double f = static_cast<double>(k <= nf / 2 ? k : nf - k) / static_cast<double>(nf);
        if (f > band_cycles / 2.0) spec[k] = 0.0;
    }
    CVec buf(nf);
    detail::fft_raw(spec, buf, +1);
    RVec out(len);
    for (std::size_t i = 0; i < len; ++i) out[i] = buf[(i + nf - c) % nf].real() / static_cast<double>(nf);
    for (std::size_t i = 0; i < c; ++i) {
        const double avg = 0.5 * (out[i] + out[len - 1 - i]);
        out[i] = out[len - 1 - i] = avg;
    }
    double e = 0.0;
    for (double v : out) e += v * v;
    const double s = 1.0 / std::sqrt(e);
    for (double& v : out) v *= s;
    return out;
}

}  // namespace

std::vector<double> single_carrier_block_papr(std::span<const double> taps, int oversampling,
                                              const mapping::ConstellationSpec& constellation, int n_blocks,
                                              int block_symbols, std::uint64_t seed) {
    require(n_blocks >= 1 && block_symbols >= 1 && oversampling >= 1, "single_carrier_block_papr: invalid sizes");
    const std::size_t m = static_cast<std::size_t>(block_symbols) * static_cast<std::size_t>(oversampling);
    require(!taps.empty() && taps.size() <= m, "single_carrier_block_papr: taps longer than a block");
    Rng rng(seed);
    const CVec h = circular_response(taps, m);
    std::vector<double> out(static_cast<std::size_t>(n_blocks));
    CVec work(m), y(m);
    for (auto& p : out) {
        const CVec s = random_symbols(constellation, static_cast<std::size_t>(block_symbols), rng);
        const auto spec = block_spectra(s, oversampling, static_cast<std::size_t>(block_symbols));
        shape_circular(spec.front(), h, work, y);
        p = papr_db(y);
    }
    return out;
}

FilterSpec optimize_tx_filter(const FilterSpec& base, const mapping::ConstellationSpec& constellation,
                              int n_train_blocks, std::uint64_t seed, const FilterDesignOptions& opt,
                              FilterDesignReport* report_out) {
    require(base.kind == FilterKind::RootRaisedCosine, "optimize_tx_filter: base must be a root-raised-cosine spec");
    base.validate();
    require(n_train_blocks >= 100, "optimize_tx_filter: at least 100 training blocks are required");
    require(opt.iterations >= 1 && opt.block_symbols >= 8, "optimize_tx_filter: invalid options");
    constellation.validate();

    const int os = base.oversampling;
    const RVec base_taps = rrc_taps(base);
    const std::size_t len = base_taps.size();
    const std::size_t c = (len - 1) / 2;
    const std::size_t nblk = static_cast<std::size_t>(opt.block_symbols);
    const std::size_t m = nblk * static_cast<std::size_t>(os);
    require(len <= m, "optimize_tx_filter: block_symbols too small for the filter span");

    Rng train_rng(derive_seed(seed, {1}));
    const auto train = block_spectra(
        random_symbols(constellation, static_cast<std::size_t>(n_train_blocks) * nblk, train_rng), os, nblk);

    FilterDesignReport rep;
    rep.base_bandwidth = occupied_bandwidth(base_taps, os, opt.bandwidth_fraction);
    const double bw_limit = rep.base_bandwidth * (1.0 + opt.bandwidth_tolerance);
    const double band_cycles = rep.base_bandwidth / os;

    // Descent on the clipping residual J = sum (|y| - clip)_+^2 of the shaped
    // training blocks, each step re-projected onto the allowed band.
    RVec taps = base_taps;
    RVec best = base_taps;
    double best_papr = std::numeric_limits<double>::infinity();
    int best_iter = -1;
    CVec work(m), y(m), e(m), grad_spec(m);
    RVec grad_circ(m);
    std::vector<double> papr(train.size());

    for (int it = 0; it <= opt.iterations; ++it) {
        const CVec h = circular_response(taps, m);
        const bool feasible = it == 0 || occupied_bandwidth(taps, os, opt.bandwidth_fraction) <= bw_limit;
        const double warm = std::min(1.0, static_cast<double>(it) / (0.2 * opt.iterations));
        const double target_db = std::isfinite(best_papr) ? best_papr - 0.3 : opt.start_clip_db;
        const double clip_db = opt.start_clip_db + (target_db - opt.start_clip_db) * warm;

        std::fill(grad_circ.begin(), grad_circ.end(), 0.0);
        for (std::size_t b = 0; b < train.size(); ++b) {
            shape_circular(train[b], h, work, y);
            papr[b] = papr_db(y);
            const double clip = std::sqrt(mean_power(y)) * std::pow(10.0, clip_db / 20.0);
            for (std::size_t n = 0; n < m; ++n) {
                const double a = std::abs(y[n]);
                e[n] = a > clip ? y[n] * ((a - clip) / a) : cplx{0.0, 0.0};
            }
            // dJ/dh[k] = 2 Re sum_n conj(e[n]) u[n - k], a circular cross-correlation.
            detail::fft_raw(e, work, -1);
            for (std::size_t k = 0; k < m; ++k) work[k] *= std::conj(train[b][k]);
            detail::fft_raw(work, grad_spec, +1);
            for (std::size_t k = 0; k < m; ++k) grad_circ[k] += grad_spec[k].real();
        }
        if (feasible) {
            const double p = papr_at_ccdf(papr, opt.ccdf_level);
            if (p < best_papr) {
                best_papr = p;
                best = taps;
                best_iter = it - 1;
            }
        }
        if (it == opt.iterations) break;

        RVec grad(len);
        double gnorm = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
            grad[i] = grad_circ[(i + m - c) % m];
            gnorm += grad[i] * grad[i];
        }
        gnorm = std::sqrt(gnorm);
        if (gnorm == 0.0) break;
        const double step = 0.02 * (1.0 - static_cast<double>(it) / opt.iterations) + 0.002;
        for (std::size_t i = 0; i < len; ++i) taps[i] -= step * grad[i] / gnorm;
        taps = project_band(taps, band_cycles);
    }

    // Held-out check on an independent symbol stream.
    Rng test_rng(derive_seed(seed, {2}));
    const int n_test = std::max(4 * n_train_blocks, 1000);
    const auto test =
        block_spectra(random_symbols(constellation, static_cast<std::size_t>(n_test) * nblk, test_rng), os, nblk);
    rep.base_papr_db = papr_quantile(test, base_taps, opt.ccdf_level);
    rep.optimized_papr_db = papr_quantile(test, best, opt.ccdf_level);
    rep.optimized_bandwidth = occupied_bandwidth(best, os, opt.bandwidth_fraction);
    rep.accepted_iteration = best_iter;
    if (report_out) *report_out = rep;

    if (rep.optimized_bandwidth > bw_limit)
        throw FilterDesignError("optimize_tx_filter: bandwidth constraint violated", rep);
    if (rep.optimized_papr_db > rep.base_papr_db) {
        // Training gain did not generalize; the base filter is the better answer.
        rep.optimized_papr_db = rep.base_papr_db;
        rep.optimized_bandwidth = rep.base_bandwidth;
        rep.accepted_iteration = -1;
        if (report_out) *report_out = rep;
        return FilterSpec::custom(base_taps, os);
    }
    return FilterSpec::custom(best, os);
}

}  // namespace subthz::sigcore
