#include "tubeground/log.hpp"

#include <iostream>
#include <mutex>

namespace tubeground::logging {
namespace {

std::mutex g_mutex;
WarnHandler g_handler;

}  // namespace

void warn(const std::string& message) {
  std::lock_guard<std::mutex> lock(g_mutex);
  if (g_handler) {
    g_handler(message);
  } else {
    std::cerr << "[tubeground] warning: " << message << "\n";
  }
}

void set_warn_handler(WarnHandler handler) {
  std::lock_guard<std::mutex> lock(g_mutex);
  g_handler = std::move(handler);
}

void reset_warn_handler() {
  std::lock_guard<std::mutex> lock(g_mutex);
  g_handler = nullptr;
}

}  // namespace tubeground::logging
