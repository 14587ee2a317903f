#pragma once

namespace traitlab {

inline constexpr const char* kToolkitVersion = "0.1.0";

}  // namespace traitlab
