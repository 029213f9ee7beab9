#pragma once

namespace sameside {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace sameside
