#include "certsmooth/parallel.hpp"

#include <charconv>
#include <cstdlib>
#include <cstring>

namespace certsmooth {

unsigned default_worker_count() noexcept
{
    if (const char* env = std::getenv("CERTSMOOTH_THREADS")) {
        unsigned value = 0;
        const auto [ptr, ec] = std::from_chars(env, env + std::strlen(env), value);
        if (ec == std::errc() && value > 0) return value;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

} // namespace certsmooth
