#include "subthz/zxm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace subthz::zxm {

std::string to_string(Count v) {
    if (v == 0) return "0";
    std::string s;
    while (v > 0) {
        s.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
        v /= 10;
    }
    std::reverse(s.begin(), s.end());
    return s;
}

void RunlengthSpec::validate() const {
    require(min_run >= 1, "RunlengthSpec: min_run must be >= 1");
    require(block_symbols >= 1, "RunlengthSpec: block_symbols must be >= 1");
    require(ftn_factor >= 1, "RunlengthSpec: ftn_factor must be >= 1");
}

namespace {

Count checked_add(Count a, Count b) {
    const Count s = a + b;
    if (s < a) throw RuntimeFailure("runlength count overflows 128 bits");
    return s;
}

// ways[rem][c]: completions of `rem` further symbols when the current run has
// length c (capped at r), with every run, the last included, of length >= r.
class CompletionTable {
public:
    CompletionTable(int n, int r) : r_(r), ways_(static_cast<std::size_t>(n) * static_cast<std::size_t>(r + 1), 0) {
        for (int c = 1; c <= r; ++c) at(0, c) = c >= r ? 1 : 0;
        for (int rem = 1; rem < n; ++rem)
            for (int c = 1; c <= r; ++c) {
                Count v = at(rem - 1, std::min(c + 1, r));
                if (c >= r) v = checked_add(v, at(rem - 1, 1));
                at(rem, c) = v;
            }
    }

    Count operator()(int rem, int c) const {
        return ways_[static_cast<std::size_t>(rem) * static_cast<std::size_t>(r_ + 1) + static_cast<std::size_t>(c)];
    }

    /// Next run length and completion count when appending `sym` after `cur`.
    std::pair<int, Count> option(std::int8_t cur, int c, std::int8_t sym, int rem) const {
        if (sym == cur) {
            const int nc = std::min(c + 1, r_);
            return {nc, (*this)(rem, nc)};
        }
        if (c < r_) return {0, 0};
        return {1, (*this)(rem, 1)};
    }

private:
    Count& at(int rem, int c) {
        return ways_[static_cast<std::size_t>(rem) * static_cast<std::size_t>(r_ + 1) + static_cast<std::size_t>(c)];
    }
    int r_;
    std::vector<Count> ways_;
};

int floor_log2(Count v) {
    int b = -1;
    while (v > 0) {
        v >>= 1;
        ++b;
    }
    return b;
}

}  // namespace

Count rl_count(int n, const RunlengthSpec& spec) {
    spec.validate();
    require(n >= 1, "rl_count: n must be >= 1");
    const CompletionTable t(n, spec.min_run);
    return t(n - 1, 1);
}

int rl_payload_bits(const RunlengthSpec& spec) {
    const Count c = rl_count(spec.block_symbols, spec);
    require(c > 0, "rl_payload_bits: no sequence satisfies the constraint at this block length");
    return floor_log2(c);
}

bool rl_valid(std::span<const std::int8_t> s, int r) {
    if (s.empty() || s[0] != 1) return false;
    int run = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != 1 && s[i] != -1) return false;
        if (i > 0 && s[i] != s[i - 1]) {
            if (run < r) return false;
            run = 0;
        }
        ++run;
    }
    return run >= r;
}

std::vector<std::int8_t> rl_encode(std::span<const std::uint8_t> bits, const RunlengthSpec& spec) {
    spec.validate();
    const int n = spec.block_symbols;
    const int k = rl_payload_bits(spec);
    require(static_cast<int>(bits.size()) == k, "rl_encode: payload of " + std::to_string(bits.size()) +
                                                    " bits, the block carries exactly " + std::to_string(k));
    Count v = 0;
    for (auto b : bits) {
        require(b <= 1, "rl_encode: input must be binary");
        v = (v << 1) | b;
    }
    const CompletionTable t(n, spec.min_run);
    std::vector<std::int8_t> s(static_cast<std::size_t>(n));
    s[0] = 1;
    int c = 1;
    for (int i = 1; i < n; ++i) {
        const int rem = n - 1 - i;
        const auto cur = s[static_cast<std::size_t>(i - 1)];
        const auto [c_lo, cnt_lo] = t.option(cur, c, -1, rem);
        if (v < cnt_lo) {
            s[static_cast<std::size_t>(i)] = -1;
            c = c_lo;
        } else {
            v -= cnt_lo;
            const auto [c_hi, cnt_hi] = t.option(cur, c, 1, rem);
            if (v >= cnt_hi) throw RuntimeFailure("rl_encode: internal rank overflow");
            s[static_cast<std::size_t>(i)] = 1;
            c = c_hi;
        }
    }
    return s;
}

Count rl_rank(std::span<const std::int8_t> s, const RunlengthSpec& spec) {
    spec.validate();
    require(static_cast<int>(s.size()) == spec.block_symbols, "rl_rank: sequence length must equal block_symbols");
    require(rl_valid(s, spec.min_run), "rl_rank: sequence violates the runlength constraint");
    const int n = spec.block_symbols;
    const CompletionTable t(n, spec.min_run);
    Count v = 0;
    int c = 1;
    for (int i = 1; i < n; ++i) {
        const int rem = n - 1 - i;
        const auto cur = s[static_cast<std::size_t>(i - 1)];
        if (s[static_cast<std::size_t>(i)] == 1) v += t.option(cur, c, -1, rem).second;
        c = t.option(cur, c, s[static_cast<std::size_t>(i)], rem).first;
    }
    return v;
}

Bits rl_decode(std::span<const std::int8_t> s, const RunlengthSpec& spec) {
    const Count v = rl_rank(s, spec);
    const int k = rl_payload_bits(spec);
    require(k >= 128 || v < (Count{1} << k), "rl_decode: sequence lies outside the payload codebook");
    Bits out(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) out[static_cast<std::size_t>(k - 1 - i)] = static_cast<std::uint8_t>((v >> i) & 1u);
    return out;
}

double rl_capacity(int r) {
    require(r >= 1, "rl_capacity: min_run must be >= 1");
    // States 1..r = current run length (capped); edges: extend, or switch from state r.
    const std::size_t n = static_cast<std::size_t>(r);
    std::vector<double> v(n, 1.0), w(n);
    double lambda = 0.0;
    for (int it = 0; it < 10000000; ++it) {
        std::fill(w.begin(), w.end(), 0.0);
        for (std::size_t c = 0; c < n; ++c) {
            if (c + 1 < n) w[c + 1] += v[c];
            else w[c] += v[c];
            if (c + 1 == n) w[0] += v[c];
        }
        double norm = 0.0;
        for (double x : w) norm = std::max(norm, x);
        double change = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            w[c] /= norm;
            change = std::max(change, std::abs(w[c] - v[c]));
        }
        v.swap(w);
        const double prev = lambda;
        lambda = norm;
        if (it > 0 && std::abs(lambda - prev) < 1e-15 && change < 1e-13) break;
    }
    return std::log2(lambda);
}

double zxm_rate(const RunlengthSpec& spec) {
    spec.validate();
    return spec.ftn_factor * rl_capacity(spec.min_run);
}

int samples_per_symbol(const RunlengthSpec& spec, const sigcore::FilterSpec& pulse) {
    spec.validate();
    pulse.validate();
    require(pulse.oversampling % spec.ftn_factor == 0,
            "zxm: pulse oversampling must be a multiple of the FTN factor");
    return pulse.oversampling / spec.ftn_factor;
}

ZxmFrame zxm_construct(std::span<const std::uint8_t> bits, const RunlengthSpec& spec, const sigcore::FilterSpec& pulse,
                       double nyquist_rate_hz) {
    require(nyquist_rate_hz > 0.0, "zxm_construct: rate must be positive");
    const int u = samples_per_symbol(spec, pulse);
    const RVec taps = sigcore::filter_taps(pulse);
    ZxmFrame f{Bits(bits.begin(), bits.end()), rl_encode(bits, spec), ComplexSignal({cplx{0.0, 0.0}}, 1.0)};
    CVec sym(f.symbols.size() + 1, cplx{0.0, 0.0});
    for (std::size_t i = 0; i < f.symbols.size(); ++i) sym[i] = static_cast<double>(f.symbols[i]);
    CVec y = sigcore::upsample_filter(sym, taps, u);
    y.resize(f.symbols.size() * static_cast<std::size_t>(u) + taps.size() - 1);
    f.signal = ComplexSignal(std::move(y), nyquist_rate_hz * pulse.oversampling);
    return f;
}

double log_normal_cdf(double x) {
    if (x > -20.0) return std::log(0.5 * std::erfc(-x / std::sqrt(2.0)));
    // Asymptotic series of the Mills ratio.
    const double x2 = x * x;
    return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * kPi) + std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
}

namespace {

struct Model {
    int n;       // symbols
    int u;       // fine samples per symbol
    long c;      // pulse centre
    long h;      // half-width kept by the detector
    RVec taps;   // full pulse
    int memory;  // symbols spanned by one observation, minus one
    std::vector<std::size_t> obs;
};

Model make_model(const RunlengthSpec& spec, const sigcore::FilterSpec& pulse, int rx_oversample, std::size_t length,
                 const DetectorOptions& opt) {
    require(rx_oversample >= 1, "zxm_detect: rx_oversample must be >= 1");
    require(opt.memory_symbols >= 1, "zxm_detect: memory must be >= 1 symbol");
    require(opt.noise_std > 0.0, "zxm_detect: noise_std must be positive");
    Model m;
    m.n = spec.block_symbols;
    m.u = samples_per_symbol(spec, pulse);
    require(m.u % rx_oversample == 0, "zxm_detect: rx_oversample must divide the samples per FTN symbol");
    m.taps = sigcore::filter_taps(pulse);
    m.c = static_cast<long>(m.taps.size() - 1) / 2;
    m.h = std::min<long>(m.c, static_cast<long>(opt.memory_symbols) * m.u / 2);
    m.memory = static_cast<int>(2 * m.h / m.u);
    const long d = m.u / rx_oversample;
    const long phase = m.c % d;
    const long first = std::max<long>(0, m.c - m.h);
    const long last = std::min<long>(static_cast<long>(length) - 1, static_cast<long>(m.n - 1) * m.u + m.c + m.h);
    for (long idx = phase; idx <= last; idx += d)
        if (idx >= first) m.obs.push_back(static_cast<std::size_t>(idx));
    return m;
}

// Step to which an observation is attached: the latest symbol it depends on.
int owner(const Model& m, std::size_t idx) {
    const long k = (static_cast<long>(idx) - m.c + m.h) / m.u;
    return static_cast<int>(std::min<long>(k, m.n - 1));
}

double tap(const Model& m, long offset) {
    // offset = idx - k*u; contributes when |offset - c| <= h.
    if (std::abs(offset - m.c) > m.h) return 0.0;
    return m.taps[static_cast<std::size_t>(offset)];
}

std::vector<double> signs_of(const ComplexSignal& x) {
    const double mag = std::abs(x[0].real());
    require(mag > 0.0, "zxm_detect: expects 1-bit quantized input (+-c on the real rail)");
    std::vector<double> s(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x[i].real();
        require(std::abs(std::abs(v) - mag) <= 1e-12 * mag,
                "zxm_detect: expects 1-bit quantized input (+-c on the real rail)");
        s[i] = v > 0.0 ? 1.0 : -1.0;
    }
    return s;
}

}  // namespace

RVec detector_taps(const RunlengthSpec& spec, const sigcore::FilterSpec& pulse, const DetectorOptions& opt) {
    const Model m = make_model(spec, pulse, 1, 1, opt);
    RVec out;
    for (long i = m.c - m.h; i <= m.c + m.h; ++i) out.push_back(m.taps[static_cast<std::size_t>(i)]);
    return out;
}

std::vector<std::size_t> observation_indices(const RunlengthSpec& spec, const sigcore::FilterSpec& pulse,
                                             int rx_oversample, std::size_t length, const DetectorOptions& opt) {
    return make_model(spec, pulse, rx_oversample, length, opt).obs;
}

double sequence_log_metric(std::span<const std::int8_t> symbols, std::span<const double> signs,
                           const RunlengthSpec& spec, const sigcore::FilterSpec& pulse, int rx_oversample,
                           const DetectorOptions& opt) {
    require(static_cast<int>(symbols.size()) == spec.block_symbols, "sequence_log_metric: wrong sequence length");
    const std::size_t length = symbols.size() * static_cast<std::size_t>(samples_per_symbol(spec, pulse)) +
                               sigcore::filter_taps(pulse).size() - 1;
    const Model m = make_model(spec, pulse, rx_oversample, length, opt);
    require(signs.size() == m.obs.size(), "sequence_log_metric: one sign per observation is required");
    double total = 0.0;
    for (std::size_t j = 0; j < m.obs.size(); ++j) {
        const long idx = static_cast<long>(m.obs[j]);
        double amp = 0.0;
        for (int k = 0; k < m.n; ++k) amp += symbols[static_cast<std::size_t>(k)] * tap(m, idx - static_cast<long>(k) * m.u);
        total += log_normal_cdf(signs[j] * amp / opt.noise_std);
    }
    return total;
}

Detection zxm_detect_sequence(const ComplexSignal& received, const RunlengthSpec& spec,
                              const sigcore::FilterSpec& pulse, int rx_oversample, const DetectorOptions& opt) {
    spec.validate();
    const std::vector<double> sgn = signs_of(received);
    const Model m = make_model(spec, pulse, rx_oversample, received.size(), opt);
    const int r = spec.min_run;
    const int hist_bits = std::max(1, m.memory);
    require(hist_bits < 30, "zxm_detect: pulse memory too long");
    const std::size_t n_hist = std::size_t{1} << hist_bits;
    const std::size_t n_states = n_hist * static_cast<std::size_t>(r);
    if (n_states > opt.max_states)
        throw RuntimeFailure("zxm_detect: trellis needs " + std::to_string(n_states) + " states (limit " +
                             std::to_string(opt.max_states) + "); shorten the pulse truncation (memory_symbols)");

    // Observations grouped by owning step.
    std::vector<std::vector<std::size_t>> per_step(static_cast<std::size_t>(m.n));
    for (std::size_t j = 0; j < m.obs.size(); ++j) per_step[static_cast<std::size_t>(owner(m, m.obs[j]))].push_back(j);

    constexpr double kNeg = -std::numeric_limits<double>::infinity();
    // State: bit i of `hist` is 1 when symbol k-1-i is +1; run in 1..r stored as run-1.
    auto index = [&](std::size_t hist, int run) { return hist * static_cast<std::size_t>(r) + static_cast<std::size_t>(run - 1); };
    std::vector<double> metric(n_states, kNeg), next(n_states);
    std::vector<std::uint32_t> back(static_cast<std::size_t>(m.n) * n_states);
    const std::size_t mask = n_hist - 1;

    for (int k = 0; k < m.n; ++k) {
        std::fill(next.begin(), next.end(), kNeg);
        const auto& obs = per_step[static_cast<std::size_t>(k)];
        auto step_from = [&](std::size_t from, double base, std::size_t hist, int run, int a) {
            const int nrun = (k == 0) ? 1 : ((hist & 1u) == (a > 0 ? 1u : 0u) ? std::min(run + 1, r) : 1);
            double g = base;
            for (std::size_t j : obs) {
                const long idx = static_cast<long>(m.obs[j]);
                double amp = a * tap(m, idx - static_cast<long>(k) * m.u);
                for (int back_k = 1; back_k <= m.memory && k - back_k >= 0; ++back_k) {
                    const int sym = ((hist >> (back_k - 1)) & 1u) ? 1 : -1;
                    amp += sym * tap(m, idx - static_cast<long>(k - back_k) * m.u);
                }
                g += log_normal_cdf(sgn[static_cast<std::size_t>(idx)] * amp / opt.noise_std);
            }
            const std::size_t nh = ((hist << 1) | (a > 0 ? 1u : 0u)) & mask;
            const std::size_t to = index(nh, nrun);
            if (g > next[to]) {
                next[to] = g;
                back[static_cast<std::size_t>(k) * n_states + to] = static_cast<std::uint32_t>(from);
            }
        };
        if (k == 0) {
            step_from(0, 0.0, 0, 1, +1);
        } else {
            for (std::size_t hist = 0; hist < n_hist; ++hist)
                for (int run = 1; run <= r; ++run) {
                    const std::size_t s = index(hist, run);
                    if (metric[s] == kNeg) continue;
                    const int prev = (hist & 1u) ? 1 : -1;
                    step_from(s, metric[s], hist, run, prev);                 // extend the run
                    if (run == r) step_from(s, metric[s], hist, run, -prev);  // sign change
                }
        }
        metric.swap(next);
    }

    std::size_t best = n_states;
    for (std::size_t hist = 0; hist < n_hist; ++hist) {
        const std::size_t s = index(hist, r);
        if (metric[s] != kNeg && (best == n_states || metric[s] > metric[best])) best = s;
    }
    if (best == n_states) throw RuntimeFailure("zxm_detect: no constrained sequence fits the block");

    Detection d;
    d.log_metric = metric[best];
    d.symbols.resize(static_cast<std::size_t>(m.n));
    std::size_t s = best;
    for (int k = m.n - 1; k >= 0; --k) {
        d.symbols[static_cast<std::size_t>(k)] = ((s / static_cast<std::size_t>(r)) & 1u) ? 1 : -1;
        s = back[static_cast<std::size_t>(k) * n_states + s];
    }
    const Count rank = rl_rank(d.symbols, spec);
    const int kbits = rl_payload_bits(spec);
    d.payload.resize(static_cast<std::size_t>(kbits));
    for (int i = 0; i < kbits; ++i)
        d.payload[static_cast<std::size_t>(kbits - 1 - i)] = static_cast<std::uint8_t>((rank >> i) & 1u);
    return d;
}

Bits zxm_detect(const ComplexSignal& received, const RunlengthSpec& spec, const sigcore::FilterSpec& pulse,
                int rx_oversample, const DetectorOptions& opt) {
    return zxm_detect_sequence(received, spec, pulse, rx_oversample, opt).payload;
}

}  // namespace subthz::zxm
