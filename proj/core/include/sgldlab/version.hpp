#pragma once

namespace sgldlab {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace sgldlab
