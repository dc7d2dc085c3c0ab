#include "omkit/threads.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

namespace omkit {

namespace {
std::atomic<std::size_t> g_workers{0};
}

void set_worker_threads(std::size_t n) { g_workers = n; }

std::size_t worker_threads() {
  const std::size_t n = g_workers.load();
  if (n > 0) return n;
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace omkit
