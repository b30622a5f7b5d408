#include "sapt/log.hpp"

#include <atomic>
#include <iostream>

namespace sapt {

namespace {
std::atomic<bool> g_warnings{true};
}

void warn(std::string_view message) {
  if (g_warnings.load(std::memory_order_relaxed)) std::cerr << "[sapt] warning: " << message << '\n';
}

void set_warnings_enabled(bool enabled) { g_warnings.store(enabled); }

bool warnings_enabled() { return g_warnings.load(); }

}  // namespace sapt
