#include "evcasimir/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace evc {

namespace {
int g_cap = -1;
}

int thread_cap()
{
    if (g_cap < 0) {
        g_cap = 1;
        if (const char* s = std::getenv("EVCASIMIR_THREADS")) {
            int v = std::atoi(s);
            if (v > 0) g_cap = v;
        }
    }
    return g_cap;
}

void set_thread_cap(int n) { g_cap = std::max(1, n); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn)
{
    std::size_t nt = std::min<std::size_t>(static_cast<std::size_t>(thread_cap()), n);
    if (nt <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nt; ++t)
        pool.emplace_back([&] {
            try {
                for (std::size_t i = next++; i < n; i = next++) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(mu);
                if (!err) err = std::current_exception();
                next = n;
            }
        });
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

} // namespace evc
