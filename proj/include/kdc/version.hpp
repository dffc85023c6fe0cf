#pragma once

namespace kdc {
inline constexpr const char* kVersion = "0.1.0";
}
