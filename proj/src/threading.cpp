#include "cobiveco/threading.hpp"

#include <atomic>
#include <thread>
#include <vector>

namespace cobiveco::threading {

namespace {
std::atomic<int> g_threads{0};  // 0 = hardware default

int hardwareThreads() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}
}  // namespace

int threadCount() {
  int n = g_threads.load();
  return n > 0 ? n : hardwareThreads();
}

void setThreadCount(int n) {
  g_threads.store(n < 1 ? 0 : n);
}

void parallelFor(std::int64_t n, const std::function<void(std::int64_t)>& fn) {
  if (n <= 0) return;
  int workers = threadCount();
  if (workers <= 1 || n == 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  // Block-cyclic work stealing via a shared counter; fn(i) only depends on i.
  const std::int64_t block = std::max<std::int64_t>(1, n / (static_cast<std::int64_t>(workers) * 8));
  std::atomic<std::int64_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto work = [&]() {
    while (true) {
      std::int64_t begin = next.fetch_add(block);
      if (begin >= n || failed.load()) return;
      std::int64_t end = std::min(n, begin + block);
      try {
        for (std::int64_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers) - 1);
  for (int t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failed.load() && error) std::rethrow_exception(error);
}

}  // namespace cobiveco::threading
