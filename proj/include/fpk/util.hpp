#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace fpk {

inline unsigned worker_count() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : n;
}

// Runs fn(block_index, begin, end) over a contiguous split of [0, n). Block
// boundaries depend only on n and the block count, so any per-block partial
// results can be combined in block order for deterministic totals.
inline void parallel_blocks(std::size_t n, std::size_t nblocks,
                            const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    if (nblocks == 0) nblocks = 1;
    if (nblocks > n) nblocks = n == 0 ? 1 : n;
    std::vector<std::thread> pool;
    pool.reserve(nblocks);
    std::size_t chunk = (n + nblocks - 1) / nblocks;
    for (std::size_t b = 0; b < nblocks; ++b) {
        std::size_t lo = b * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&fn, b, lo, hi] { fn(b, lo, hi); });
    }
    for (auto& t : pool) t.join();
}

// Composite Simpson weights require an odd node count.
inline double simpson_sum(const std::vector<double>& f, double h) {
    std::size_t n = f.size();
    if (n < 3 || n % 2 == 0) throw std::invalid_argument("simpson needs an odd node count >= 3");
    double odd = 0, even = 0;
    for (std::size_t i = 1; i + 1 < n; i += 2) odd += f[i];
    for (std::size_t i = 2; i + 1 < n; i += 2) even += f[i];
    return h / 3.0 * (f.front() + f.back() + 4.0 * odd + 2.0 * even);
}

inline double simpson_weight(std::size_t i, std::size_t n, double h) {
    if (i == 0 || i + 1 == n) return h / 3.0;
    return (i % 2 == 1) ? 4.0 * h / 3.0 : 2.0 * h / 3.0;
}

// FNV-1a, used for artifact and manifest hashes.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed = 0xcbf29ce484222325ull) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace fpk
