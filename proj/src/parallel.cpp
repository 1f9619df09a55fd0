#include "nudge/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace nudge {

namespace {

std::size_t hardware_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

std::atomic<std::size_t>& configured_threads() {
  static std::atomic<std::size_t> value{1};
  return value;
}

}  // namespace

void set_thread_count(std::size_t n) {
  configured_threads().store(n == 0 ? hardware_threads() : n);
}

std::size_t thread_count() { return configured_threads().load(); }

std::size_t thread_count_from_env() {
  const char* raw = std::getenv("NUDGE_THREADS");
  if (raw == nullptr || *raw == '\0') return 0;
  try {
    std::size_t pos = 0;
    const unsigned long v = std::stoul(raw, &pos);
    return pos == std::string(raw).size() ? static_cast<std::size_t>(v) : 0;
  } catch (const std::exception&) {
    return 0;
  }
}

}  // namespace nudge
