#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace mlift {

// Embedding dimension is at most 4 (unit quaternions), intrinsic dimension at
// most 3. All small vectors/matrices live on the stack.
using VecN = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 4, 1>;
using VecS = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;
using MatSN = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 4>;
using MatSD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;
using MatND = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 4, 3>;

inline constexpr double kPi = 3.14159265358979323846;

class invalid_argument_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class degenerate_geometry_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class io_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline int hardware_threads() {
    if (const char* env = std::getenv("MLIFT_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

// Chunked parallel map over [0, n). Chunk boundaries depend only on n and the
// thread count, so per-chunk results are reproducible.
inline void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& body) {
    int nt = hardware_threads();
    if (nt <= 1 || n < 256) {
        body(0, n);
        return;
    }
    std::int64_t chunk = (n + nt - 1) / nt;
    std::vector<std::thread> workers;
    workers.reserve(nt);
    for (int t = 0; t < nt; ++t) {
        std::int64_t lo = t * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        workers.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    for (auto& w : workers) w.join();
}

// Deterministic reduction: chunk sums are combined in chunk order.
inline double parallel_sum(std::int64_t n, const std::function<double(std::int64_t, std::int64_t)>& chunk_sum) {
    int nt = hardware_threads();
    if (nt <= 1 || n < 256) return chunk_sum(0, n);
    std::int64_t chunk = (n + nt - 1) / nt;
    std::vector<double> partial;
    std::vector<std::thread> workers;
    for (int t = 0; t < nt; ++t) {
        std::int64_t lo = t * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        partial.push_back(0.0);
    }
    for (std::size_t t = 0; t < partial.size(); ++t) {
        std::int64_t lo = static_cast<std::int64_t>(t) * chunk;
        std::int64_t hi = std::min(n, lo + chunk);
        workers.emplace_back([&chunk_sum, &partial, t, lo, hi] { partial[t] = chunk_sum(lo, hi); });
    }
    for (auto& w : workers) w.join();
    double total = 0.0;
    for (double s : partial) total += s;
    return total;
}

} // namespace mlift
