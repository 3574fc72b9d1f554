#pragma once

namespace fproxkit {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace fproxkit
