#pragma once

#include <functional>
#include <string_view>

namespace ccax {

using WarningHandler = std::function<void(std::string_view)>;

/// Replaces the sink for non-fatal warnings (stderr by default). Returns the
/// previous handler. Passing an empty function silences warnings.
WarningHandler set_warning_handler(WarningHandler handler);
void warn(std::string_view message);

}  // namespace ccax
