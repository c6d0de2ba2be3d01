#include "vortlab/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace vortlab {

int thread_count(int requested)
{
    if (requested > 0)
        return requested;
    if (const char* env = std::getenv("VORTLAB_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n > 0)
                return n;
        } catch (const std::exception&) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn)
{
    const int w = std::min(std::max(1, threads), n);
    if (w <= 1) {
        for (int i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::exception_ptr err;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (int t = 0; t < w; ++t)
        pool.emplace_back([&, t] {
            const int lo = static_cast<int>(static_cast<long>(n) * t / w);
            const int hi = static_cast<int>(static_cast<long>(n) * (t + 1) / w);
            try {
                for (int i = lo; i < hi; ++i)
                    fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!err)
                    err = std::current_exception();
            }
        });
    for (auto& th : pool)
        th.join();
    if (err)
        std::rethrow_exception(err);
}

} // namespace vortlab
