#pragma once

#include <cstddef>
#include <string>

namespace bodyfit {

/// Warnings go to stderr unless silenced (tests silence them). Every call is
/// counted either way.
void log_warning(const std::string& message);
void set_warnings_enabled(bool enabled);
std::size_t warning_count();

}  // namespace bodyfit
