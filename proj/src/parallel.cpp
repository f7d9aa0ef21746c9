#include "wdro/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "wdro/error.hpp"

namespace wdro {
namespace {
std::atomic<int> g_threads{1};
constexpr std::size_t kBlock = 8;
}  // namespace

void set_num_threads(int n) {
  if (n < 1) throw ValidationError("thread count must be >= 1");
  g_threads.store(n);
}

int num_threads() { return g_threads.load(); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const auto workers = static_cast<std::size_t>(std::min<std::size_t>(num_threads(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= kBlock) {
    double s = 0.0;
    for (double e : v) s += e;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

namespace {
void sum_rows(const double* data, std::size_t rows, std::size_t cols, double* out) {
  if (rows <= kBlock) {
    std::fill(out, out + cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) out[c] += data[r * cols + c];
    }
    return;
  }
  const std::size_t half = rows / 2;
  std::vector<double> right(cols);
  sum_rows(data, half, cols, out);
  sum_rows(data + half * cols, rows - half, cols, right.data());
  for (std::size_t c = 0; c < cols; ++c) out[c] += right[c];
}
}  // namespace

void pairwise_sum_rows(std::span<const double> data, std::size_t rows, std::size_t cols, std::span<double> out) {
  sum_rows(data.data(), rows, cols, out.data());
}

}  // namespace wdro
