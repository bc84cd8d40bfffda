#include "varmatch/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <thread>

namespace varmatch {

namespace {

int g_thread_count = 0;  // 0 = not yet resolved

int resolve_thread_count() {
    const char* env = std::getenv("VARMATCH_THREADS");
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    if (env != nullptr && *env != '\0') {
        const int requested = std::atoi(env);
        if (requested >= 1) return std::min(requested, hw);
    }
    return hw;
}

}  // namespace

int thread_count() {
    if (g_thread_count <= 0) g_thread_count = resolve_thread_count();
    return g_thread_count;
}

void set_thread_count(int n) {
    if (n < 1) throw std::invalid_argument("thread count must be >= 1");
    g_thread_count = n;
}

void run_blocks(size_t num_blocks, const std::function<void(size_t)>& fn) {
    if (num_blocks == 0) return;
    const int workers = std::min<size_t>(static_cast<size_t>(thread_count()), num_blocks);
    if (workers <= 1 || num_blocks == 1) {
        for (size_t b = 0; b < num_blocks; ++b) fn(b);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const size_t b = next.fetch_add(1);
                if (b >= num_blocks) break;
                fn(b);
            }
        });
    }
    for (auto& t : pool) t.join();
}

double blocked_sum(size_t count, const std::function<double(size_t)>& term) {
    if (count == 0) return 0.0;
    const size_t num_blocks = (count + kParallelBlock - 1) / kParallelBlock;
    std::vector<double> partial(num_blocks, 0.0);
    const auto eval_block = [&](size_t b) {
        const size_t lo = b * kParallelBlock;
        const size_t hi = std::min(lo + kParallelBlock, count);
        double s = 0.0;
        for (size_t i = lo; i < hi; ++i) s += term(i);
        partial[b] = s;
    };
    if (count < kParallelThreshold) {
        for (size_t b = 0; b < num_blocks; ++b) eval_block(b);
    } else {
        run_blocks(num_blocks, eval_block);
    }
    double total = 0.0;
    for (double s : partial) total += s;
    return total;
}

void parallel_for(size_t count, const std::function<void(size_t)>& fn) {
    if (count == 0) return;
    if (count < kParallelThreshold) {
        for (size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    const size_t num_blocks = (count + kParallelBlock - 1) / kParallelBlock;
    run_blocks(num_blocks, [&](size_t b) {
        const size_t lo = b * kParallelBlock;
        const size_t hi = std::min(lo + kParallelBlock, count);
        for (size_t i = lo; i < hi; ++i) fn(i);
    });
}

}  // namespace varmatch
