#pragma once

namespace deconv {

inline constexpr const char* kVersion = "deconv 0.1.0";

} // namespace deconv
