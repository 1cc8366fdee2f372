#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace parity_bell
{

// Worker cap from PARITY_BELL_THREADS, else the hardware concurrency.
inline std::size_t default_thread_count()
{
    std::size_t hardware = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("PARITY_BELL_THREADS"))
    {
        char* end = nullptr;
        const long requested = std::strtol(env, &end, 10);
        if (end != env && requested > 0)
        {
            return static_cast<std::size_t>(requested);
        }
    }
    return hardware;
}

//---------------------------------------------------------------------------//
/*!
 * Run body(i) for i in [0, count) on up to `threads` workers.
 *
 * Each index is handled exactly once; callers write results into slot i, so
 * output never depends on scheduling. The first exception is rethrown.
 */
template<class Body>
void parallel_for(std::size_t count, Body&& body, std::size_t threads = default_thread_count())
{
    threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(count, 1));
    if (threads == 1)
    {
        for (std::size_t i = 0; i < count; ++i)
        {
            body(i);
        }
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++)
        {
            try
            {
                body(i);
            }
            catch (...)
            {
                std::lock_guard lock(failure_mutex);
                if (!failure)
                {
                    failure = std::current_exception();
                }
            }
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(threads - 1);
    for (std::size_t t = 1; t < threads; ++t)
    {
        pool.emplace_back(worker);
    }
    worker();
    pool.clear();
    if (failure)
    {
        std::rethrow_exception(failure);
    }
}

//---------------------------------------------------------------------------//
/*!
 * Deterministic blocked reduction over [0, count).
 *
 * Blocks have a fixed size independent of the worker count and partial
 * results are combined in block order, so floating-point sums are
 * bit-identical for any degree of parallelism.
 */
template<class T, class BlockFn, class Combine>
T blocked_reduce(std::size_t count,
                 std::size_t block_size,
                 T identity,
                 BlockFn&& block_fn,
                 Combine&& combine,
                 std::size_t threads = default_thread_count())
{
    const std::size_t blocks = (count + block_size - 1) / block_size;
    std::vector<T> partial(blocks, identity);
    parallel_for(
        blocks,
        [&](std::size_t b) {
            const std::size_t begin = b * block_size;
            const std::size_t end = std::min(count, begin + block_size);
            partial[b] = block_fn(begin, end);
        },
        threads);
    T total = identity;
    for (const auto& p : partial)
    {
        total = combine(total, p);
    }
    return total;
}

}  // namespace parity_bell
