#pragma once

#include <string_view>

namespace sapt {

// Process-wide warning sink (stderr). Tests silence it.
void warn(std::string_view message);
void set_warnings_enabled(bool enabled);
bool warnings_enabled();

}  // namespace sapt
