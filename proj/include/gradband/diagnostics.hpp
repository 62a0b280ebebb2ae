#pragma once

#include <string_view>

namespace gradband {

/// Emits a warning to stderr (unless silenced) and counts it.
void warn(std::string_view message);

/// Number of warnings emitted since process start.
long warning_count();

void set_warnings_silenced(bool silenced);

}  // namespace gradband
