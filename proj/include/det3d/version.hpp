#pragma once

namespace det3d {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace det3d
