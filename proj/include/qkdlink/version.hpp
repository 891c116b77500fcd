#pragma once

namespace qkdlink {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace qkdlink
