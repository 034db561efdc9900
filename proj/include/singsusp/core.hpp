#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace singsusp {

struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

constexpr double kInf = std::numeric_limits<double>::infinity();

// splitmix64 finalizer, used to derive independent per-item seeds
inline std::uint64_t mix64(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream)
{
    return mix64(mix64(seed) ^ (stream * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : eng_(mix64(seed)) {}
    std::uint64_t next() { return eng_(); }
    // uniform in [0,1), platform independent
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    // uniform integer in [0, n)
    std::uint64_t below(std::uint64_t n)
    {
        if (n <= 1) return 0;
        const std::uint64_t lim = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t r;
        do r = eng_(); while (r >= lim);
        return r % n;
    }
    template <class T>
    void shuffle(std::vector<T> &v)
    {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }

private:
    std::mt19937_64 eng_;
};

inline unsigned &worker_budget_ref()
{
    static unsigned w = 0;
    return w;
}

inline unsigned workers()
{
    unsigned w = worker_budget_ref();
    if (w == 0) {
        if (const char *env = std::getenv("SINGSUSP_WORKERS")) {
            long v = std::strtol(env, nullptr, 10);
            if (v > 0) w = static_cast<unsigned>(v);
        }
    }
    if (w == 0) w = std::max(1u, std::thread::hardware_concurrency());
    return w;
}

inline void set_workers(unsigned w) { worker_budget_ref() = w; }

inline bool &inside_parallel_region()
{
    thread_local bool flag = false;
    return flag;
}

// Runs fn(i) for i in [0,n). Nested calls run serially so the global budget holds.
template <class Fn>
void parallel_for(std::size_t n, Fn &&fn)
{
    const unsigned w = workers();
    if (n == 0) return;
    if (w <= 1 || n == 1 || inside_parallel_region()) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const unsigned nt = static_cast<unsigned>(std::min<std::size_t>(w, n));
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    auto body = [&] {
        inside_parallel_region() = true;
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) break;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!err) err = std::current_exception();
                next.store(n);
            }
        }
        inside_parallel_region() = false;
    };
    std::vector<std::thread> pool;
    pool.reserve(nt - 1);
    for (unsigned t = 1; t < nt; ++t) pool.emplace_back(body);
    body();
    for (auto &t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

inline double wrap01(double v)
{
    double r = v - std::floor(v);
    if (r >= 1.0) r = 0.0;
    return r;
}

inline double circle_dist(double a, double b)
{
    double d = std::fabs(a - b);
    d -= std::floor(d);
    return std::min(d, 1.0 - d);
}

} // namespace singsusp
