#ifndef TRAFFICBENCH_CORE_HPP
#define TRAFFICBENCH_CORE_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tb {

inline constexpr const char* kVersion = "1.0.0";

struct tb_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// parse failures carry the 1-based line number of the offending input line
struct parse_error : tb_error {
    std::size_t line;
    parse_error(std::size_t line_no, const std::string& msg)
        : tb_error("line " + std::to_string(line_no) + ": " + msg), line(line_no) {}
};

// pipeline failures name the stage they happened in
struct stage_error : tb_error {
    std::string stage;
    stage_error(std::string stage_name, const std::string& msg)
        : tb_error("stage '" + stage_name + "': " + msg), stage(std::move(stage_name)) {}
};

/// Dense row-major N x D matrix of 64-bit reals.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

    bool operator==(const Matrix&) const = default;
};

// bit-level equality, distinguishes -0.0 from 0.0 (determinism tests)
inline bool bit_equal(std::span<const double> a, std::span<const double> b) {
    return a.size() == b.size() &&
           (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}
inline bool bit_equal(const Matrix& a, const Matrix& b) {
    return a.rows == b.rows && a.cols == b.cols && bit_equal(a.data, b.data);
}

/// Deterministic RNG. All distributions are implemented by hand so that a
/// given seed produces the same stream on every platform and toolchain.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller; consumes exactly two draws per call
    double gaussian() {
        double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // unbiased draw from [0, n)
    std::size_t index(std::size_t n) {
        if (n < 2) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return static_cast<std::size_t>(v % n);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
    }

private:
    std::mt19937_64 gen_;
};

// splitmix64 finalizer; used to derive independent sub-seeds
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a_bytes(const void* bytes, std::size_t n,
                                 std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    return fnv1a_bytes(s.data(), s.size(), h);
}

/// Worker cap for the OpenMP kernels. TRAFFICBENCH_THREADS overrides the
/// runtime default when set to a positive integer.
int max_workers();

/// Runs fn(0..n-1). Parallel path shards over OpenMP workers; results must be
/// written to disjoint output slots so both paths are bit-identical.
template <class Fn>
void parallel_for(std::size_t n, bool parallel, Fn&& fn) {
#ifdef _OPENMP
    if (parallel && n > 1 && max_workers() > 1) {
        const int workers = max_workers();
#pragma omp parallel for schedule(dynamic) num_threads(workers)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i)
            fn(static_cast<std::size_t>(i));
        return;
    }
#else
    (void)parallel;
#endif
    for (std::size_t i = 0; i < n; ++i) fn(i);
}

/// Writes content to path atomically: data goes to "<path>.partial" first and
/// is renamed into place only on success. A crash never leaves a bare
/// half-written file behind.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace tb

#endif
