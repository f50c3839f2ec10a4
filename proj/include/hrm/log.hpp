#pragma once

#include <string>

namespace hrm {

/// Writes a warning to stderr once per distinct message.
void warn_once(const std::string& message);

/// Silences warnings (tests and Monte Carlo loops).
void set_warnings_enabled(bool enabled);

}  // namespace hrm
