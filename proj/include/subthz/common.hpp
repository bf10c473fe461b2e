#pragma once

#include <complex>
#include <functional>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace subthz {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;
using RVec = std::vector<double>;
using Bits = std::vector<std::uint8_t>;

inline constexpr double kPi = 3.14159265358979323846;

/// Precondition violation on an argument (bad shape, out-of-range parameter).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Failure while a computation is running (unreachable target, oversized trellis, ...).
class RuntimeFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
    if (!ok) throw InvalidArgument(what);
}

/// Sampled complex baseband signal with its sample rate.
///
/// Construction validates the invariants: at least one sample, every sample
/// finite, and a strictly positive sample rate.
class ComplexSignal {
public:
    ComplexSignal(CVec samples, double sample_rate_hz);

    const CVec& samples() const noexcept { return samples_; }
    std::span<const cplx> view() const noexcept { return samples_; }
    double sample_rate_hz() const noexcept { return rate_; }
    std::size_t size() const noexcept { return samples_.size(); }
    const cplx& operator[](std::size_t i) const { return samples_[i]; }

    double energy() const noexcept;
    double mean_power() const noexcept;
    double duration_s() const noexcept { return static_cast<double>(samples_.size()) / rate_; }

    /// Releases the sample buffer; the signal is left empty and must not be used again.
    CVec take() && { return std::move(samples_); }

private:
    CVec samples_;
    double rate_;
};

double energy(std::span<const cplx> x) noexcept;
/// Locale-independent shortest round-trip formatting.
std::string format_double(double v);
/// Locale-independent fixed-point formatting with `digits` decimals.
std::string format_fixed(double v, int digits);
double mean_power(std::span<const cplx> x) noexcept;

// splitmix64 finalizer; used to derive independent sub-seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Counter-based sub-seed: the result depends only on the master seed and the
/// task coordinates, never on the order in which tasks are executed.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> coords) noexcept;

/// Runs task(0..n_tasks-1) on up to `workers` threads. The first exception
/// thrown by any task is rethrown after all threads have joined.
void parallel_for(std::size_t n_tasks, int workers, const std::function<void(std::size_t)>& task);

/// Seeded random source shared by every stochastic stage.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    double normal() { return normal_(eng_); }
    /// Circularly-symmetric complex Gaussian with E|z|^2 = variance.
    cplx complex_normal(double variance);
    double uniform() { return uniform_(eng_); }
    std::uint8_t bit() { return static_cast<std::uint8_t>(eng_() >> 63); }
    Bits bits(std::size_t n);
    std::uint64_t next_u64() { return eng_(); }

private:
    std::mt19937_64 eng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace subthz
