#include "subthz/common.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace subthz {

ComplexSignal::ComplexSignal(CVec samples, double sample_rate_hz)
    : samples_(std::move(samples)), rate_(sample_rate_hz) {
    require(!samples_.empty(), "ComplexSignal: at least one sample is required");
    require(std::isfinite(rate_) && rate_ > 0.0, "ComplexSignal: sample rate must be positive");
    for (const auto& s : samples_) {
        if (!std::isfinite(s.real()) || !std::isfinite(s.imag()))
            throw InvalidArgument("ComplexSignal: non-finite sample");
    }
}

double ComplexSignal::energy() const noexcept { return subthz::energy(samples_); }
double ComplexSignal::mean_power() const noexcept { return subthz::mean_power(samples_); }

double energy(std::span<const cplx> x) noexcept {
    double e = 0.0;
    for (const auto& v : x) e += std::norm(v);
    return e;
}

double mean_power(std::span<const cplx> x) noexcept {
    return x.empty() ? 0.0 : energy(x) / static_cast<double>(x.size());
}

std::string format_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string format_fixed(double v, int digits) {
    char buf[128];
    const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, digits);
    return std::string(buf, r.ptr);
}

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> coords) noexcept {
    std::uint64_t h = mix64(master);
    for (auto c : coords) h = mix64(h ^ mix64(c + 0x632BE59BD9B4E019ULL));
    return h;
}

cplx Rng::complex_normal(double variance) {
    const double s = std::sqrt(variance / 2.0);
    const double re = normal();
    const double im = normal();
    return {s * re, s * im};
}

Bits Rng::bits(std::size_t n) {
    Bits out(n);
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i % 64 == 0) word = eng_();
        out[i] = static_cast<std::uint8_t>((word >> (i % 64)) & 1U);
    }
    return out;
}

void parallel_for(std::size_t n_tasks, int workers, const std::function<void(std::size_t)>& task) {
    if (workers <= 1 || n_tasks <= 1) {
        for (std::size_t i = 0; i < n_tasks; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    std::vector<std::thread> pool;
    const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(workers), n_tasks);
    for (std::size_t t = 0; t < n_threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n_tasks; i = next++) {
                try {
                    task(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace subthz
