#include "core/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace axf {

namespace {

std::atomic<int> g_threads{-1};

int resolve_default() {
    if (const char* env = std::getenv("AXF_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

}  // namespace

void set_threads(int n) { g_threads.store(n > 0 ? n : -1); }

int threads() {
    int n = g_threads.load();
    if (n <= 0) {
        n = resolve_default();
        g_threads.store(n);
    }
    return n;
}

void parallel_for_chunks(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
    if (n <= 0) return;
    const int nt = threads();
    if (nt <= 1 || n == 1) {
        fn(0, n);
        return;
    }
    const int workers = static_cast<int>(std::min<int64_t>(nt, n));
    const int64_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers - 1));
    for (int w = 1; w < workers; ++w) {
        const int64_t b = w * chunk;
        const int64_t e = std::min<int64_t>(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    fn(0, std::min<int64_t>(n, chunk));
    for (auto& t : pool) t.join();
}

void parallel_for(int64_t n, const std::function<void(int64_t)>& fn) {
    parallel_for_chunks(n, [&fn](int64_t b, int64_t e) {
        for (int64_t i = b; i < e; ++i) fn(i);
    });
}

}  // namespace axf
