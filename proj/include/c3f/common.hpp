// Shared small utilities: error type, deterministic RNG helpers, warnings,
// and a chunked parallel_for whose results do not depend on thread count.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace c3f {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Accumulates non-fatal diagnostics; the CLI copies them into the run manifest.
using WarningLog = std::vector<std::string>;

inline void warn(WarningLog* log, const std::string& msg) {
    if (log) log->push_back(msg);
}

// SplitMix64, used to derive independent seeds from (master seed, counter)
// pairs so replicate streams are reproducible in any execution order.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t counter) {
    return splitmix64(master + counter);
}

// Deterministic double in [0,1) from mt19937_64; normal via Box-Muller.
// std::normal_distribution is implementation-defined, so we roll our own to
// keep artifacts bit-stable across standard library versions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    std::uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Thread count for within-stage parallelism; 1 unless C3F_THREADS is set.
unsigned thread_count();

// Runs fn(i) for i in [0, n). Work is split into contiguous chunks so each
// index is processed exactly once; callers write results into preallocated
// slots, which keeps output identical for every thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Round-trip-safe decimal formatting for doubles written to CSV/JSON text.
std::string format_double(double v);

}  // namespace c3f
