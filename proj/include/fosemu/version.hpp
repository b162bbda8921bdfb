#pragma once

namespace fosemu {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace fosemu
