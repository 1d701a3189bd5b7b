#pragma once

#include <functional>
#include <string>

namespace tubeground {

/// Process-wide warning sink. Defaults to stderr; tests may capture it.
namespace logging {

using WarnHandler = std::function<void(const std::string&)>;

void warn(const std::string& message);
void set_warn_handler(WarnHandler handler);
void reset_warn_handler();

}  // namespace logging
}  // namespace tubeground
