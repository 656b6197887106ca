#pragma once

namespace hsnr {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace hsnr
