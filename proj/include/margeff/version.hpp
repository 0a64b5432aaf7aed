#pragma once

namespace margeff {

inline constexpr const char* kEngineVersion = "0.1.0";

}  // namespace margeff
