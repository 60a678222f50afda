#pragma once

#include <functional>
#include <string_view>

namespace fixpose {

using WarningSink = std::function<void(std::string_view)>;

/// Replace the process-wide warning sink (default: stderr). Returns the previous sink.
WarningSink set_warning_sink(WarningSink sink);

void warn(std::string_view message);

}  // namespace fixpose
