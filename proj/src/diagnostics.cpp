#include "gradband/diagnostics.hpp"

#include <atomic>
#include <iostream>

namespace gradband {

namespace {
std::atomic<long> g_warnings{0};
std::atomic<bool> g_silenced{false};
}  // namespace

void warn(std::string_view message) {
  ++g_warnings;
  if (!g_silenced.load()) std::cerr << "warning: " << message << '\n';
}

long warning_count() { return g_warnings.load(); }

void set_warnings_silenced(bool silenced) { g_silenced.store(silenced); }

}  // namespace gradband
