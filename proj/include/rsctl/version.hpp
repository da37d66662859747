#pragma once

namespace rsctl {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace rsctl
