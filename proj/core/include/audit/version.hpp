#pragma once

namespace audit {
inline constexpr const char* kVersion = "0.4.0";
}
