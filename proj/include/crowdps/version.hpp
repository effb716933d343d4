#pragma once

namespace crowdps {

inline constexpr const char* kVersion = "0.1.0";

} // namespace crowdps
