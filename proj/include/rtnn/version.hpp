#pragma once

namespace rtnn {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace rtnn
