#ifndef WDRO_PARALLEL_HPP
#define WDRO_PARALLEL_HPP

#include <cstddef>
#include <functional>
#include <span>

namespace wdro {

/// Process-wide worker count (>= 1) used by the parallel helpers.
void set_num_threads(int n);
int num_threads();

/// Calls body(i) for i in [0, n) on a bounded pool of workers. Each index is
/// visited exactly once; callers write results to slot i and reduce in index
/// order afterwards, so outputs never depend on the worker count. The first
/// exception thrown by any body is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// Pairwise (cascade) sum in index order. Deterministic for a given input.
double pairwise_sum(std::span<const double> v);

/// Column sums of a row-major rows x cols array by pairwise summation over
/// rows, written to out (length cols).
void pairwise_sum_rows(std::span<const double> data, std::size_t rows, std::size_t cols, std::span<double> out);

}  // namespace wdro

#endif  // WDRO_PARALLEL_HPP
