#pragma once

namespace qkdsim {

inline constexpr const char* version = "0.1.0";

}  // namespace qkdsim
