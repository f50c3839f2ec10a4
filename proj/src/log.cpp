#include "hrm/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>
#include <set>

namespace hrm {

namespace {
std::mutex g_mutex;
std::set<std::string> g_seen;
std::atomic<bool> g_enabled{true};
}  // namespace

void warn_once(const std::string& message) {
    if (!g_enabled.load()) return;
    std::lock_guard lock(g_mutex);
    if (g_seen.insert(message).second) std::clog << "warning: " << message << '\n';
}

void set_warnings_enabled(bool enabled) { g_enabled.store(enabled); }

}  // namespace hrm
