#include "softgrasp/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace softgrasp {

namespace {
std::atomic<bool> g_deterministic{false};
}

void set_deterministic(bool on) { g_deterministic = on; }
bool deterministic() { return g_deterministic; }

std::size_t worker_count() {
    if (g_deterministic) return 1;
    std::size_t n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("SOFTGRASP_THREADS")) {
        try {
            const long cap = std::stol(env);
            if (cap >= 1) n = std::min<std::size_t>(n, static_cast<std::size_t>(cap));
        } catch (...) {
        }
    }
    return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
    const std::size_t workers = std::min(worker_count(), std::max<std::size_t>(1, n / 256));
    if (workers <= 1) {
        body(0, n);
        return;
    }
    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::exception_ptr> errors(workers);
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 1; w < workers; ++w) {
            const std::size_t b = w * chunk, e = std::min(n, b + chunk);
            if (b < e)
                pool.emplace_back([&body, &errors, w, b, e] {
                    try {
                        body(b, e);
                    } catch (...) {
                        errors[w] = std::current_exception();
                    }
                });
        }
        try {
            body(0, std::min(n, chunk));
        } catch (...) {
            errors[0] = std::current_exception();
        }
    }
    // Lowest chunk first, so the reported error matches a sequential scan.
    for (auto& err : errors)
        if (err) std::rethrow_exception(err);
}

}  // namespace softgrasp
