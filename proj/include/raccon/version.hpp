#pragma once

#include <string_view>

namespace raccon {

inline constexpr std::string_view kVersion = "1.0.0";

} // namespace raccon
