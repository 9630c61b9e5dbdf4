#include "zvlab/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <thread>
#include <vector>

namespace zvlab {

int worker_count() {
    if (const char* env = std::getenv("ZVLAB_THREADS"); env != nullptr && *env != '\0') {
        int value = 0;
        auto [ptr, ec] = std::from_chars(env, env + std::strlen(env), value);
        if (ec == std::errc() && value > 0) return value;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
    if (n == 0) return;
    const auto workers = static_cast<std::size_t>(std::max(1, worker_count()));
    const std::size_t chunks = std::min(workers, n);
    if (chunks == 1) {
        body(0, n);
        return;
    }

    std::vector<std::exception_ptr> errors(chunks);
    std::vector<std::thread> threads;
    threads.reserve(chunks - 1);
    auto run = [&](std::size_t c) {
        const std::size_t begin = n * c / chunks;
        const std::size_t end = n * (c + 1) / chunks;
        try {
            body(begin, end);
        } catch (...) {
            errors[c] = std::current_exception();
        }
    };
    for (std::size_t c = 1; c < chunks; ++c) threads.emplace_back(run, c);
    run(0);
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

namespace {

double tree_sum(const double* v, std::size_t n, std::size_t stride) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += v[i * stride];
        return s;
    }
    const std::size_t half = n / 2;
    return tree_sum(v, half, stride) + tree_sum(v + half * stride, n - half, stride);
}

}  // namespace

double pairwise_sum(std::span<const double> values) {
    return tree_sum(values.data(), values.size(), 1);
}

double pairwise_sum_strided(std::span<const double> values, std::size_t count,
                            std::size_t stride, std::size_t offset) {
    if (count == 0) return 0.0;
    return tree_sum(values.data() + offset, count, stride);
}

}  // namespace zvlab
