#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace zvlab {

/// Worker count from ZVLAB_THREADS (read on every call), else hardware
/// concurrency. Results never depend on this value.
int worker_count();

/// Runs body(begin, end) over a static contiguous partition of [0, n).
/// Exceptions thrown by workers are rethrown on the calling thread
/// (lowest range wins, so the reported error is deterministic).
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

/// Pairwise (tree) summation with a fixed split pattern.
double pairwise_sum(std::span<const double> values);

/// Pairwise sum of values[i * stride + offset] for i in [0, count).
double pairwise_sum_strided(std::span<const double> values, std::size_t count,
                            std::size_t stride, std::size_t offset);

}  // namespace zvlab
