#include "fluidest/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace fluidest {

namespace {

std::atomic<int> g_override{0};
thread_local bool t_inside = false;

int env_workers() {
    const char* s = std::getenv("FLUIDEST_THREADS");
    if (s == nullptr) return 0;
    try {
        return std::max(0, std::stoi(s));
    } catch (const std::exception&) {
        return 0;
    }
}

}  // namespace

int worker_count() {
    if (int o = g_override.load(); o > 0) return o;
    if (int e = env_workers(); e > 0) return e;
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

void set_worker_count(int n) { g_override.store(std::max(0, n)); }

void parallel_for(int begin, int end, const std::function<void(int)>& body) {
    const int n = end - begin;
    if (n <= 0) return;
    // Nested calls run serially on the worker that issued them.
    const int workers = t_inside ? 1 : std::min(worker_count(), n);
    if (workers <= 1) {
        for (int i = begin; i < end; ++i) body(i);
        return;
    }

    std::atomic<int> next{begin};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto run = [&] {
        const bool was_inside = t_inside;
        t_inside = true;
        for (int i = next.fetch_add(1); i < end; i = next.fetch_add(1)) {
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
        t_inside = was_inside;
    };

    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers - 1));
    for (int t = 1; t < workers; ++t) pool.emplace_back(run);
    run();
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace fluidest
