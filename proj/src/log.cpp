#include "bodyfit/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace bodyfit {

namespace {
std::atomic<bool> g_enabled{true};
std::atomic<std::size_t> g_count{0};
std::mutex g_mutex;
}  // namespace

void set_warnings_enabled(bool enabled) { g_enabled = enabled; }

std::size_t warning_count() { return g_count; }

void log_warning(const std::string& message) {
  ++g_count;
  if (!g_enabled) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  std::cerr << "warning: " << message << '\n';
}

}  // namespace bodyfit
