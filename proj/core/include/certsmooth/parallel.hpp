#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace certsmooth {

/// Worker count from CERTSMOOTH_THREADS when set to a positive integer,
/// otherwise the hardware concurrency (at least 1).
unsigned default_worker_count() noexcept;

/// Splits [0, count) into at most `workers` contiguous chunks and calls
/// fn(chunk, begin, end) for each, the first on the calling thread. The chunk
/// index is dense in [0, chunks). Rethrows the first exception raised.
template <class Fn>
std::size_t parallel_chunks(std::size_t count, unsigned workers, Fn&& fn)
{
    const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(workers, count));
    const auto bounds = [&](std::size_t c) { return count * c / chunks; };
    if (chunks == 1) {
        fn(std::size_t{0}, std::size_t{0}, count);
        return 1;
    }
    std::vector<std::exception_ptr> errors(chunks);
    {
        std::vector<std::jthread> threads;
        threads.reserve(chunks - 1);
        for (std::size_t c = 1; c < chunks; ++c) {
            threads.emplace_back([&, c] {
                try {
                    fn(c, bounds(c), bounds(c + 1));
                } catch (...) {
                    errors[c] = std::current_exception();
                }
            });
        }
        try {
            fn(std::size_t{0}, bounds(0), bounds(1));
        } catch (...) {
            errors[0] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return chunks;
}

} // namespace certsmooth
